"""Log-log slope of the single-ball energy 4 pi r^2 + 6 V over several windows.

The elastic term is linear in V, so it bends the curve upward near V = 1 and
the fitted slope sits above 2/3 unless the window stays well below V = 1.
"""

import numpy as np

from corner_nucleation import scaling
from corner_nucleation.corner_geometry import DEFAULT_CORNER, validate_corner
from corner_nucleation.energy import small_volume_energy


def main():
    dom = validate_corner(*DEFAULT_CORNER)
    V = np.logspace(-6, 0, 29)
    E = np.array([small_volume_energy(v, dom).total for v in V])
    for lo, hi in [(1e-6, 1.0), (1e-5, 1e-1), (1e-6, 1e-2), (1e-6, 1e-3)]:
        fr = scaling.fit_power_law(V, E, (lo, hi), "small_volume")
        print(f"window [{lo:g}, {hi:g}]: slope {fr.slope:.4f}  ({fr.points} points)")
    b = small_volume_energy(1.0, dom)
    print(f"V = 1: interfacial {b.interfacial:.4f}, elastic {b.elastic:.4f}")


if __name__ == "__main__":
    main()
