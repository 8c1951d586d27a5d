"""Certify ball coverings of three synthetic martensite sets and save the inputs and reports."""

import argparse
from pathlib import Path

from corner_nucleation import scaling
from corner_nucleation.branching import build_layout
from corner_nucleation.corner_geometry import DEFAULT_CORNER, mu, validate_corner
from corner_nucleation.covering import (
    CoveringConfig,
    certify,
    voxelize_ball,
    voxelize_balls,
    voxelize_layout,
    write_vox,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/covering"))
    ap.add_argument("--resolution", type=int, default=128)
    ap.add_argument("--kappa", type=float, default=0.25)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    dom = validate_corner(*DEFAULT_CORNER)
    d = dom.a + dom.b + dom.c
    m = mu(dom)
    n = args.resolution
    suites = {
        "ball": voxelize_ball(dom, dom.origin + d * (40 / m), 30.0, n=n),
        "slab": voxelize_layout(build_layout(dom, 1e4), n=n),
        "blobs": voxelize_balls(dom, [dom.origin + d * (30 / m), dom.origin + d * (90 / m)], [20.0, 25.0], n=n),
    }
    for name, vs in suites.items():
        write_vox(args.out / f"{name}.vox", vs)
        rep = certify(vs, dom, CoveringConfig(kappa=args.kappa))
        (args.out / f"{name}.json").write_text(scaling.dumps(rep.as_dict()))
        print(f"{name:6s} balls {len(rep.balls):3d}  covered {rep.covered_fraction:.4f}  "
              f"fractions {[round(f, 3) for f in rep.fractions]}  c {rep.c:.4f}  ok {rep.ok}")


if __name__ == "__main__":
    main()
