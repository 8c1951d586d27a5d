"""Energy of the corner construction by two independent routes.

``total_energy_analytic`` sums exact per-cell integrals (the elastic misfit
in a cell is ``|sym(∂ũ/∂y1 ⊗ b^1)|²`` with ``∂ũ/∂y1`` piecewise constant on
regions bounded by straight stripe walls) and the boundary-layer terms.  The
quadrature route samples the assembled field on a grid: a midpoint rule for
the elastic energy and a Cauchy–Crofton estimator (random directions, short
segments) for the interfacial energy ``Σ_i TV(χ_i)``.

Both routes measure the configuration on the construction box
``[-R, 0] x [0, R]^2``; this bounds the energy of the slab clipped to the
corner from above.  Interfaces between two variants count twice in
``Σ_i TV(χ_i)`` and austenite/martensite interfaces once.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .branching import BranchingLayout, slice_fraction, stripe_intervals, stripe_slopes
from .corner_geometry import CornerDomain, HabitFrame, mu
from .displacement import cell_field_constants, energy_density, evaluate_chart, micro_profile
from .strain_algebra import sym, variant_strain


@dataclass
class EnergyBreakdown:
    V: float
    R: float
    interfacial: float
    elastic: float
    total: float
    interior: float
    layer: float
    austenite_face: float
    method: str
    flags: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        d = asdict(self)
        d.pop("flags")
        return d


def cell_energy_bound(w: float, h: float) -> float:
    """Per-cell bound ``h w + w^4 / h`` (unit constants)."""
    if w <= 0 or h <= 0:
        raise ValueError("cell dimensions must be positive")
    return h * w + w ** 4 / h


def elastic_density_constant(frame: HabitFrame) -> float:
    """``|sym((slope1 - slope2) ⊗ b^1)|²``: misfit density per unit ``(dL1/dy1)²``."""
    cf = cell_field_constants(frame)
    m = sym(np.outer(cf.slope1 - cf.slope2, frame.dual[0]))
    return float(np.sum(m * m))


def wall_area_factor(frame: HabitFrame, slope: float) -> float:
    """Physical area per unit ``(y1, y3)`` area of a wall ``y2 = const + slope*y1``."""
    return float(np.linalg.norm(np.cross(frame.b1 + slope * frame.b2, frame.b3)))


def face_area_factor(frame: HabitFrame) -> float:
    """Physical area per unit ``(y2, y3)`` area of a plane ``y1 = const``."""
    return float(np.linalg.norm(np.cross(frame.b2, frame.b3)))


def _y1_derivative_regions(w: float, h: float):
    """``(dL1/dy1, area)`` for the regions between consecutive stripe walls."""
    mid = stripe_intervals(0.5 * h, w, h)
    slopes = stripe_slopes(w, h)
    cuts = [0.0]
    values = []
    acc = 0.0
    for (lo, hi), (dlo, dhi) in zip(mid, slopes):
        values.append(acc)             # gap below the stripe
        cuts.append(lo)
        values.append(acc - dlo)       # inside the stripe
        cuts.append(hi)
        acc += dhi - dlo
    values.append(acc)
    cuts.append(w)
    # walls are straight, so each region's area is h times its mid-height width
    return [(v, h * (b - a)) for v, a, b in zip(values, cuts[:-1], cuts[1:])]


@dataclass(frozen=True)
class CellEnergy:
    w: float
    h: float
    elastic: float
    interfacial: float

    @property
    def total(self) -> float:
        return self.elastic + self.interfacial


def cell_energy(frame: HabitFrame, w: float, h: float) -> CellEnergy:
    """Exact elastic and interfacial energy of one cell of width ``w``, height ``h``."""
    k = elastic_density_constant(frame)
    integral = math.fsum(v * v * area for v, area in _y1_derivative_regions(w, h))
    elastic = k * frame.jacobian * w * integral
    walls = math.fsum(wall_area_factor(frame, s) for pair in stripe_slopes(w, h) for s in pair)
    interfacial = 2.0 * h * w * walls
    return CellEnergy(w, h, elastic, interfacial)


def cell_elastic_closed_form(frame: HabitFrame, w: float, h: float) -> float:
    """Hand-integrated per-cell elastic energy ``κ |det B| 5 w^4 / (972 h)``."""
    return elastic_density_constant(frame) * frame.jacobian * 5.0 * w ** 4 / (972.0 * h)


def generation_energies(layout: BranchingLayout) -> list[CellEnergy]:
    s = layout.schedule
    return [cell_energy(layout.frame, w, h) for w, h in zip(s.widths, s.heights)]


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)


def layer_elastic_energy(layout: BranchingLayout) -> float:
    """Exact elastic energy of the unit boundary layer over the full box.

    The misfit is affine in ``(λ, y2)`` on each piece of the finest top slice,
    so 3-point Gauss–Legendre in both variables integrates it exactly.
    """
    frame, s = layout.frame, layout.schedule
    cf = cell_field_constants(frame)
    wM, hM = s.widths[-1], s.heights[-1]
    bup1, bup2 = frame.dual[0], frame.dual[1]
    cuts = [0.0] + [v for iv in stripe_intervals(hM, wM, hM) for v in iv] + [wM]
    lam = 0.5 * (_GAUSS_X + 1.0)
    wl = 0.5 * _GAUSS_W
    period = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        y2 = a + (b - a) * lam
        wy = (b - a) * wl
        top, _, dtop2 = micro_profile(np.full(3, hM), y2, wM, hM, cf.slope1, cf.slope2)
        for lm, wlm in zip(lam, wl):
            mis = sym(-np.einsum("ni,j->nij", top, bup1)
                      + np.einsum("ni,j->nij", lm * dtop2 - cf.slope1, bup2))
            dens = np.einsum("nij,nij->n", mis, mis)
            period += wlm * float(dens @ wy)
    R = s.R
    return period * (R / wM) * R * frame.jacobian


def total_energy_analytic(layout: BranchingLayout) -> EnergyBreakdown:
    frame, s = layout.frame, layout.schedule
    R = s.R
    cells = generation_energies(layout)
    counts = [s.K * 9 ** i for i in range(s.M + 1)]
    int_el = math.fsum(n * c.elastic for n, c in zip(counts, cells))
    int_if = math.fsum(n * c.interfacial for n, c in zip(counts, cells))

    area = R * R * face_area_factor(frame)
    face = area
    _, f2_top = slice_fraction(s.heights[-1], s.widths[-1], s.heights[-1])
    layer_if = 2.0 * f2_top * area
    layer_el = layer_elastic_energy(layout)

    interfacial = int_if + layer_if + face
    elastic = int_el + layer_el
    V = layout.placement.V if layout.placement is not None else float("nan")
    return EnergyBreakdown(
        V=V, R=R, interfacial=interfacial, elastic=elastic, total=interfacial + elastic,
        interior=int_el + int_if, layer=layer_el + layer_if, austenite_face=face,
        method="analytic",
        flags={"unbranched": s.unbranched, "relaxed_stop": s.relaxed_stop,
               "interior_elastic": int_el, "interior_interfacial": int_if,
               "layer_elastic": layer_el, "layer_interfacial": layer_if},
    )


def interfacial_energy_analytic(layout: BranchingLayout) -> float:
    """Stripe walls of every cell, the pattern change at ``y1 = -1`` and the austenite face."""
    return total_energy_analytic(layout).interfacial


def geometric_partial_sum(M: int) -> float:
    """``Σ_{i<=M} 9^i (1/3)^{5i/2} = Σ 3^{-i/2}`` in closed form."""
    q = 3.0 ** -0.5
    return (1.0 - q ** (M + 1)) / (1.0 - q)


def small_volume_energy(V: float, domain: CornerDomain) -> EnergyBreakdown:
    """A ball of pure variant 1 with ``u = 0``, centred on the corner axis."""
    if not 0 < V <= 1:
        raise ValueError(f"small-volume construction needs 0 < V <= 1, got {V}")
    r = (3.0 * V / (4.0 * math.pi)) ** (1.0 / 3.0)
    centre = domain.origin + (domain.a + domain.b + domain.c) * r / mu(domain)
    flags = {"radius": r, "center": centre.tolist()}
    if domain.boundary_distance(centre) < r * (1 - 1e-12):
        flags["pushed_inward"] = True
    interfacial = 4.0 * math.pi * r * r
    elastic = float(np.sum(variant_strain(1) ** 2)) * V
    return EnergyBreakdown(V=V, R=r, interfacial=interfacial, elastic=elastic,
                           total=interfacial + elastic, interior=elastic, layer=0.0,
                           austenite_face=interfacial, method="analytic", flags=flags)


# --------------------------------------------------------------------------
# quadrature route
# --------------------------------------------------------------------------

class LayoutConfiguration:
    """Box (or corner-clipped) configuration of a layout, as seen by the oracles."""

    def __init__(self, layout: BranchingLayout, clip: bool = False):
        self.layout = layout
        self.clip = clip

    def phase(self, x):
        return self.layout.phase(x, clip=self.clip)

    def density(self, x):
        y = self.layout.to_chart(x)
        return energy_density(self.layout, evaluate_chart(self.layout, y, clip=self.clip))

    def region(self, x):
        """Open set on which the total variation is measured."""
        if self.clip and self.layout.domain is not None:
            return self.layout.domain.boundary_distance(x) > 0
        y = self.layout.to_chart(x)
        R = self.layout.R
        return ((y[:, 0] > -R) & (y[:, 1] > 0) & (y[:, 1] < R) & (y[:, 2] > 0) & (y[:, 2] < R))


class BallConfiguration:
    def __init__(self, center, radius: float, variant: int = 1):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.variant = variant

    def phase(self, x):
        inside = np.sum((x - self.center) ** 2, axis=1) <= self.radius ** 2
        return np.where(inside, self.variant, 0).astype(np.int8)

    def density(self, x):
        e = variant_strain(self.variant)
        return np.where(self.phase(x) > 0, float(np.sum(e * e)), 0.0)

    def region(self, x):
        return np.ones(len(x), dtype=bool)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Regular grid on a chart box ``x = origin + basis @ y``, ``lower <= y <= upper``."""

    origin: np.ndarray
    basis: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    shape: tuple[int, int, int]
    seed: int = 0
    chunk: int = 1 << 18

    @property
    def spacing(self):
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return abs(float(np.linalg.det(self.basis))) * float(np.prod(self.spacing))

    @property
    def physical_spacing(self):
        return self.spacing * np.linalg.norm(self.basis, axis=0)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def chunks(self):
        return [(a, min(a + self.chunk, self.size)) for a in range(0, self.size, self.chunk)]

    def points(self, start: int, stop: int, jitter=None):
        """Physical sample points with flat indices ``start..stop``."""
        idx = np.stack(np.unravel_index(np.arange(start, stop), self.shape), axis=1).astype(float)
        off = 0.5 if jitter is None else jitter
        y = np.asarray(self.lower) + (idx + off) * self.spacing
        return y @ np.asarray(self.basis).T + self.origin

    @classmethod
    def for_layout(cls, layout: BranchingLayout, n: int, n2: int | None = None,
                   n3: int | None = None, pad: float = 0.0, seed: int = 0):
        """Grid on ``[-R, pad] x [0, R] x [0, R]`` with ``n`` cells along y1.

        The fields do not depend on ``y3``; ``n3`` defaults to a coarse 4.
        """
        R = layout.R
        n2 = n if n2 is None else n2
        n3 = 4 if n3 is None else n3
        n1 = n + int(math.ceil(pad * n / R))
        upper1 = -R + n1 * R / n
        return cls(layout.z, layout.frame.basis, np.array([-R, 0.0, 0.0]),
                   np.array([upper1, R, R]), (n1, n2, n3), seed)

    @classmethod
    def cartesian(cls, lower, upper, shape, seed: int = 0):
        return cls(np.zeros(3), np.eye(3), np.asarray(lower, float), np.asarray(upper, float),
                   tuple(shape), seed)


def _map_chunks(fn, chunks, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, chunks))
    return [fn(c) for c in chunks]


def elastic_energy_quadrature(config, grid: QuadratureGrid, workers: int = 1) -> float:
    """Midpoint rule for ``∫ |e(u) - Σ χ_i e(i)|²``; chunked with a fixed reduction order."""
    def part(bounds):
        return math.fsum(config.density(grid.points(*bounds)))
    return math.fsum(_map_chunks(part, grid.chunks(), workers)) * grid.cell_volume


def _uniform_directions(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def interfacial_energy_grid(config, grid: QuadratureGrid, delta: float | None = None,
                            directions: int = 2, workers: int = 1,
                            finest_feature: float | None = None) -> float:
    """Cauchy–Crofton estimate of ``Σ_i TV(χ_i)`` on the grid region.

    For a flat interface of area A and segments of length δ with uniformly
    random direction, the expected measure of points whose segment crosses it
    is ``δ A / 2``.  Each grid cell gets a jittered sample point and
    ``directions`` random directions; jumps between two variants count twice.
    Segments leaving ``config.region`` are discarded.
    """
    h = float(np.min(grid.physical_spacing))
    delta = 2.0 * h if delta is None else float(delta)
    if finest_feature is not None and finest_feature < 8 * h:
        warnings.warn(f"grid spacing {h:.3g} resolves the finest feature "
                      f"{finest_feature:.3g} with fewer than 8 cells", stacklevel=2)
    chunks = grid.chunks()
    seqs = np.random.SeedSequence(grid.seed).spawn(len(chunks))

    def part(job):
        (a, b), seq = job
        rng = np.random.default_rng(seq)
        x = grid.points(a, b, jitter=rng.random((b - a, 3)))
        total = 0
        for _ in range(directions):
            d = _uniform_directions(rng, b - a) * (0.5 * delta)
            p, q = x + d, x - d
            ok = config.region(p) & config.region(q)
            pp, pq = config.phase(p[ok]), config.phase(q[ok])
            diff = pp != pq
            total += int(np.sum(diff)) + int(np.sum(diff & (pp > 0) & (pq > 0)))
        return total

    jumps = sum(_map_chunks(part, list(zip(chunks, seqs)), workers))
    return 2.0 * jumps * grid.cell_volume / (directions * delta)


def default_layout_grid(layout: BranchingLayout, n: int, seed: int = 0) -> QuadratureGrid:
    """``n`` cells along y1, ``2n`` along y2 (stripes are thinnest in y2), 4 along y3."""
    return QuadratureGrid.for_layout(layout, n, n2=2 * n, n3=4, pad=4.0 * layout.R / n, seed=seed)


def total_energy_quadrature(layout: BranchingLayout, n: int, seed: int = 0,
                            workers: int = 1) -> EnergyBreakdown:
    """Grid route on the construction box; the partition fields are not resolved."""
    cfg = LayoutConfiguration(layout, clip=False)
    grid = default_layout_grid(layout, n, seed)
    s = layout.schedule
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        interfacial = interfacial_energy_grid(cfg, grid, workers=workers,
                                              finest_feature=s.widths[-1] / 9.0)
    elastic = elastic_energy_quadrature(cfg, grid, workers=workers)
    V = layout.placement.V if layout.placement is not None else float("nan")
    nan = float("nan")
    return EnergyBreakdown(V=V, R=s.R, interfacial=interfacial, elastic=elastic,
                           total=interfacial + elastic, interior=nan, layer=nan,
                           austenite_face=nan, method="quadrature",
                           flags={"grid": list(grid.shape),
                                  "under_resolved": any("fewer than 8" in str(w.message) for w in caught)})
