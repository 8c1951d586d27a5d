"""Ball covering of a voxelised martensite set inside a corner.

The pipeline picks discrete density points of the set, walks each one along
``d = a + b + c`` while growing a ball until the set fills between 1/10 and
9/10 of its ``κ``-shrunk copy, selects a disjoint subfamily greedily and then
checks the geometric properties of the result.  All volumes are voxel-centre
counts.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .corner_geometry import CornerDomain, mu

BAND = (0.1, 0.9)


# --------------------------------------------------------------------------
# voxel sets
# --------------------------------------------------------------------------

@dataclass(eq=False)
class VoxelSet:
    """Occupancy on a regular grid; voxel ``(i, j, k)`` has centre ``origin + (idx + 1/2) spacing``."""

    bits: np.ndarray
    origin: np.ndarray
    spacing: float
    _prefix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 3:
            raise ValueError("bits must be a 3-d array")
        if np.any(self.bits > 1):
            raise ValueError("bits must be 0/1")
        self.origin = np.asarray(self.origin, dtype=float)
        self.spacing = float(self.spacing)
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.bits.shape)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def volume(self) -> float:
        return self.count * self.spacing ** 3

    def centers(self, idx):
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.spacing

    def occupied_centers(self):
        return self.centers(np.argwhere(self.bits))

    @property
    def prefix(self):
        """Cumulative counts along x with a leading zero plane."""
        if self._prefix is None:
            p = np.zeros((self.dims[0] + 1,) + self.dims[1:], dtype=np.int32)
            np.cumsum(self.bits, axis=0, out=p[1:])
            self._prefix = p
        return self._prefix

    def ball_counts(self, center, radius: float) -> tuple[int, int]:
        """``(occupied, total)`` voxel centres in the closed ball; ``total`` ignores the array bounds."""
        ci = (np.asarray(center, dtype=float) - self.origin) / self.spacing - 0.5
        rho = radius / self.spacing
        if rho < 0:
            return 0, 0
        j = np.arange(math.ceil(ci[1] - rho), math.floor(ci[1] + rho) + 1)
        k = np.arange(math.ceil(ci[2] - rho), math.floor(ci[2] + rho) + 1)
        J, K = np.meshgrid(j, k, indexing="ij")
        r2 = rho * rho - (J - ci[1]) ** 2 - (K - ci[2]) ** 2
        ok = r2 >= 0
        J, K, r2 = J[ok], K[ok], r2[ok]
        half = np.sqrt(r2)
        lo = np.ceil(ci[0] - half).astype(np.int64)
        hi = np.floor(ci[0] + half).astype(np.int64)
        total = int(np.sum(np.maximum(hi - lo + 1, 0)))
        nx, ny, nz = self.dims
        inside = (J >= 0) & (J < ny) & (K >= 0) & (K < nz)
        lo_c = np.clip(lo[inside], 0, nx)
        hi_c = np.clip(hi[inside] + 1, 0, nx)
        hi_c = np.maximum(hi_c, lo_c)
        P = self.prefix
        occ = int(np.sum(P[hi_c, J[inside], K[inside]] - P[lo_c, J[inside], K[inside]]))
        return occ, total


def write_vox(path, vs: VoxelSet) -> None:
    nx, ny, nz = vs.dims
    ox, oy, oz = (repr(float(v)) for v in vs.origin)
    header = f"VOX3 {nx} {ny} {nz} {ox} {oy} {oz} {float(vs.spacing)!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.asarray(vs.bits, dtype=np.uint8).tobytes(order="F"))


def read_vox(path) -> VoxelSet:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        payload = fh.read()
    if len(header) != 8 or header[0] != "VOX3":
        raise ValueError(f"{path}: not a VOX3 file")
    nx, ny, nz = (int(v) for v in header[1:4])
    origin = [float(v) for v in header[4:7]]
    spacing = float(header[7])
    if len(payload) != nx * ny * nz:
        raise ValueError(f"{path}: expected {nx * ny * nz} voxel bytes, found {len(payload)}")
    bits = np.frombuffer(payload, dtype=np.uint8).reshape((nx, ny, nz), order="F")
    return VoxelSet(bits.copy(), origin, spacing)


def voxelize(indicator, lower, upper, n: int) -> VoxelSet:
    """Sample ``indicator(points) -> bool`` on ``n`` voxels along the longest side of a box."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    spacing = float(np.max(upper - lower)) / n
    dims = np.maximum(np.ceil((upper - lower) / spacing - 1e-9).astype(int), 1)
    bits = np.zeros(tuple(dims), dtype=np.uint8)
    ii, jj = np.meshgrid(np.arange(dims[0]), np.arange(dims[1]), indexing="ij")
    plane = np.stack([ii.ravel(), jj.ravel()], axis=1)
    for k in range(dims[2]):
        idx = np.column_stack([plane, np.full(len(plane), k)])
        pts = lower + (idx + 0.5) * spacing
        bits[:, :, k] = np.asarray(indicator(pts), dtype=bool).reshape(dims[0], dims[1])
    return VoxelSet(bits, lower, spacing)


def voxelize_ball(domain: CornerDomain, center, radius: float, n: int = 128) -> VoxelSet:
    center = np.asarray(center, dtype=float)
    pad = radius * 1.05

    def ind(x):
        return (np.sum((x - center) ** 2, axis=1) <= radius ** 2) & domain.contains(x)
    return voxelize(ind, center - pad, center + pad, n)


def voxelize_balls(domain: CornerDomain, centers, radii, n: int = 128) -> VoxelSet:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(radii, dtype=float)
    lo = np.min(centers - radii[:, None], axis=0)
    hi = np.max(centers + radii[:, None], axis=0)
    pad = 0.05 * float(np.max(hi - lo))

    def ind(x):
        hit = np.zeros(len(x), dtype=bool)
        for c, r in zip(centers, radii):
            hit |= np.sum((x - c) ** 2, axis=1) <= r * r
        return hit & domain.contains(x)
    return voxelize(ind, lo - pad, hi + pad, n)


def voxelize_layout(layout, n: int = 128) -> VoxelSet:
    """Martensite of a corner layout (slab clipped to the corner)."""
    from .corner_geometry import slab_vertices

    if layout.domain is None:
        raise ValueError("layout has no corner domain to clip against")
    verts = slab_vertices(layout.domain, layout.frame.n, layout.placement.t)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    pad = 0.02 * float(np.max(hi - lo))
    return voxelize(lambda x: layout.labels(x, clip=True) > 0, lo - pad, hi + pad, n)


# --------------------------------------------------------------------------
# covering pipeline
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")


def _ball_kernel(window: int):
    g = np.arange(-window, window + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    return (X * X + Y * Y + Z * Z <= window * window).astype(np.float64)


def density_points(vs: VoxelSet, window: int = 2, threshold: float = 0.99):
    """Occupied voxel centres whose ball-shaped window is at least ``threshold`` full."""
    if vs.count == 0:
        raise ValueError("empty voxel set")
    kern = _ball_kernel(window)
    occ = ndimage.convolve(vs.bits.astype(np.float64), kern, mode="constant", cval=0.0)
    mask = (vs.bits > 0) & (occ >= threshold * kern.sum() - 1e-9)
    return vs.centers(np.argwhere(mask))


def stratified_subsample(points, block: float, max_points: int, seed: int = 0):
    """At most one point per cubic block, then a seeded thinning to ``max_points``."""
    if len(points) == 0:
        return points
    keys = np.floor(points / block).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    pts = points[np.sort(first)]
    if len(pts) > max_points:
        rng = np.random.default_rng(seed)
        pts = pts[np.sort(rng.choice(len(pts), max_points, replace=False))]
    return pts


def dilation_fraction(vs: VoxelSet, x0, r0: float, t: float, kappa: float,
                      domain: CornerDomain, direction=None) -> float:
    """Fraction of ``B(x0 + t d, κ(r0 + μ t))`` occupied by the set.

    Raises if the enclosing ball ``B(x0 + t d, r0 + μ t)`` leaves the corner.
    """
    if not r0 > 0 or t < 0:
        raise ValueError("need r0 > 0 and t >= 0")
    m = mu(domain)
    d = domain.a + domain.b + domain.c if direction is None else np.asarray(direction, float)
    c = np.asarray(x0, dtype=float) + t * d
    r = r0 + m * t
    if domain.boundary_distance(c) < r * (1.0 - 1e-12):
        raise ValueError("enclosing ball leaves the corner; check μ and the direction")
    occ, tot = vs.ball_counts(c, kappa * r)
    # a ball too small to hold a voxel centre counts no martensite
    return occ / tot if tot else 0.0


@dataclass(frozen=True)
class BandHit:
    t: float
    fraction: float
    jumped: bool = False


def find_band_time(vs: VoxelSet, x0, r0: float, kappa: float, domain: CornerDomain,
                   band=BAND, max_doublings: int = 64, bisections: int = 60) -> BandHit:
    """Smallest-scale ``t >= 0`` found with ``f(t)`` in the band.

    If ``f(0)`` is already in the band, ``t = 0``.  Otherwise the step doubles
    until ``f`` drops to the upper band edge, then bisection closes in.  A
    voxel count can jump across the band; the closest value is then returned
    with ``jumped=True``.
    """
    lo_band, hi_band = band
    f = lambda t: dilation_fraction(vs, x0, r0, t, kappa, domain)  # noqa: E731
    f0 = f(0.0)
    if f0 < lo_band:
        raise ValueError(f"f(0) = {f0:.3f} < {lo_band}: not a density point at this scale")
    if f0 <= hi_band:
        return BandHit(0.0, f0)
    step = vs.spacing / max(mu(domain), 1e-12)
    a, fa = 0.0, f0
    for _ in range(max_doublings):
        b, fb = a + step, f(a + step)
        if fb <= hi_band:
            break
        a, fa, step = b, fb, 2 * step
    else:
        raise RuntimeError("fraction never fell below the band; is the set bounded?")
    if fb >= lo_band:
        best = BandHit(b, fb)
    else:
        best = None
        for _ in range(bisections):
            m = 0.5 * (a + b)
            fm = f(m)
            if lo_band <= fm <= hi_band:
                best = BandHit(m, fm)
                break
            if fm > hi_band:
                a, fa = m, fm
            else:
                b, fb = m, fm
        if best is None:
            if fa - hi_band <= lo_band - fb:
                best = BandHit(a, fa, True)
            else:
                best = BandHit(b, fb, True)
    return best


def vitali_select(balls):
    """Greedy disjoint subfamily, largest radius first, ties by centre lexicographically.

    Every candidate meets a kept ball of at least its radius, so the 5x
    enlargements of the kept balls cover all candidates.
    """
    order = sorted(balls, key=lambda b: (-b.radius, tuple(b.center)))
    kept, centres, radii = [], [], []
    for b in order:
        if centres:
            c = np.asarray(b.center)
            dist = np.linalg.norm(np.asarray(centres) - c, axis=1)
            if np.any(dist < np.asarray(radii) + b.radius):
                continue
        kept.append(b)
        centres.append(b.center)
        radii.append(b.radius)
    return kept


def covers_centers(kept, candidates, enlargement: float = 5.0) -> bool:
    """Brute-force check that the enlarged kept balls contain every candidate centre."""
    if not candidates:
        return True
    C = np.asarray([b.center for b in candidates])
    covered = np.zeros(len(C), dtype=bool)
    for b in kept:
        covered |= np.linalg.norm(C - np.asarray(b.center), axis=1) <= enlargement * b.radius
    return bool(covered.all())


def covered_fraction(vs: VoxelSet, centers, radii, chunk: int = 1 << 18) -> float:
    """Fraction of occupied voxel centres inside the union of the balls."""
    pts = vs.occupied_centers()
    if len(pts) == 0:
        return 0.0
    order = np.argsort(-np.asarray(radii))
    remaining = pts
    for i in order:
        c, r = np.asarray(centers[i]), radii[i]
        keep = []
        for s in range(0, len(remaining), chunk):
            blk = remaining[s:s + chunk]
            keep.append(blk[np.sum((blk - c) ** 2, axis=1) > r * r])
        remaining = np.concatenate(keep) if keep else remaining
        if len(remaining) == 0:
            break
    return 1.0 - len(remaining) / len(pts)


@dataclass
class CoveringReport:
    balls: list
    kappa: float
    mu: float
    disjoint_ok: bool
    inside_ok: bool
    coverage_ok: bool
    fraction_ok: bool
    covered_fraction: float
    sum_r3: float
    proxy_sum_r73: float
    proxy_ok: bool
    volume: float
    c: float
    fractions: list
    fraction_strict_count: int
    jumped_count: int
    seeds: int
    density_threshold: float
    spacing: float

    @property
    def ok(self) -> bool:
        return self.disjoint_ok and self.inside_ok and self.coverage_ok and self.fraction_ok and self.proxy_ok

    def as_dict(self) -> dict:
        return {
            "balls": [{"center": list(map(float, b.center)), "radius": float(b.radius)} for b in self.balls],
            "kappa": self.kappa, "mu": self.mu,
            "disjoint_ok": self.disjoint_ok, "inside_ok": self.inside_ok,
            "coverage_ok": self.coverage_ok, "fraction_ok": self.fraction_ok,
            "proxy_ok": self.proxy_ok, "ok": self.ok,
            "covered_fraction": self.covered_fraction,
            "sum_r3": self.sum_r3, "proxy_sum_r73": self.proxy_sum_r73,
            "volume": self.volume, "c": self.c,
            "fractions": self.fractions,
            "fraction_strict_count": self.fraction_strict_count,
            "jumped_count": self.jumped_count, "seeds": self.seeds,
            "density_threshold": self.density_threshold, "spacing": self.spacing,
        }


@dataclass(frozen=True)
class CoveringConfig:
    kappa: float = 0.25
    window: int = 2
    threshold: float = 0.99
    max_seeds: int = 2000
    seed_block: int = 2
    coverage_target: float = 0.99
    seed: int = 0
    workers: int = 1


def certify(vs: VoxelSet, domain: CornerDomain, config: CoveringConfig = CoveringConfig()) -> CoveringReport:
    if not 0 < config.kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    if vs.count == 0:
        raise ValueError("empty voxel set")
    m = mu(domain)
    h = vs.spacing
    threshold = config.threshold
    pts = density_points(vs, config.window, threshold)
    if len(pts) == 0:
        warnings.warn("no density points at the default threshold; falling back to 1/10", stacklevel=2)
        threshold = BAND[0]
        pts = density_points(vs, config.window, threshold)
    if len(pts) == 0:
        raise ValueError("no density points")
    pts = stratified_subsample(pts, config.seed_block * h, config.max_seeds, config.seed)

    d = domain.a + domain.b + domain.c
    r_window = config.window * h
    r0s = np.minimum(r_window, domain.boundary_distance(pts))
    usable = r0s > 0.5 * h
    pts, r0s = pts[usable], r0s[usable]
    if len(pts) == 0:
        raise ValueError("every density point touches the corner boundary")

    def walk(i):
        try:
            return find_band_time(vs, pts[i], float(r0s[i]), config.kappa, domain)
        except ValueError:
            return None

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            hits = list(ex.map(walk, range(len(pts))))
    else:
        hits = [walk(i) for i in range(len(pts))]

    candidates, cores = [], {}
    for x0, r0, hit in zip(pts, r0s, hits):
        if hit is None:
            continue
        centre = tuple(float(v) for v in x0 + hit.t * d)
        core = float(r0 + m * hit.t)
        cand = Ball(centre, 3.0 * core / m)
        candidates.append(cand)
        cores[cand] = (core, hit)
    if not candidates:
        raise ValueError("no density point admits a band time")

    kept = vitali_select(candidates)
    balls = [Ball(b.center, cores[b][0]) for b in kept]
    C = np.asarray([b.center for b in balls])
    r = np.asarray([b.radius for b in balls])

    diff = C[:, None, :] - C[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(dist, np.inf)
    disjoint_ok = bool(np.all(dist >= r[:, None] + r[None, :]))
    inside_ok = bool(np.all(domain.boundary_distance(C) >= r))

    cov = covered_fraction(vs, C, 15.0 * r / m)
    fractions, band_ok, strict = [], [], 0
    for b in balls:
        occ, tot = vs.ball_counts(np.asarray(b.center), config.kappa * b.radius)
        f = occ / tot
        dv = 3.0 * h / (config.kappa * b.radius)
        fractions.append(f)
        band_ok.append(BAND[0] - dv <= f <= BAND[1] + dv)
        strict += int(BAND[0] <= f <= BAND[1])

    sum_r3 = float(np.sum(r ** 3))
    proxy = float(np.sum(r ** (7.0 / 3.0)))
    V = vs.volume
    return CoveringReport(
        balls=balls, kappa=config.kappa, mu=m,
        disjoint_ok=disjoint_ok, inside_ok=inside_ok,
        coverage_ok=cov >= config.coverage_target, fraction_ok=all(band_ok),
        covered_fraction=cov, sum_r3=sum_r3, proxy_sum_r73=proxy,
        # subadditivity is exact; the slack only absorbs rounding of the powers
        proxy_ok=proxy >= sum_r3 ** (7.0 / 9.0) * (1.0 - 1e-12),
        volume=V, c=sum_r3 / V, fractions=fractions, fraction_strict_count=strict,
        jumped_count=sum(1 for b in kept if cores[b][1].jumped),
        seeds=len(pts), density_threshold=threshold, spacing=h,
    )
