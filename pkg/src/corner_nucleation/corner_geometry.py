"""Corner domains, habit normals and the construction frame.

The corner is the cone ``{origin + αa + βb + γc : α, β, γ ≥ 0}``.  A habit
plane cuts off the corner when its normal has a strictly positive (or strictly
negative) dot product with all three edge vectors; the martensite slab is then
the tetrahedron ``Ω ∩ {(x - origin)·n ≤ t}``.

The construction frame is non-orthogonal.  Points are charted as
``x = z + y1*b1 + y2*b2 + y3*b3``, so ``y = dual @ (x - z)`` where the rows of
``dual`` are the dual vectors ``b^i``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .strain_algebra import (
    TWIN_TABLE_ORDER,
    ConstructionGradients,
    construction_gradients,
    twin_normal,
    variant_strain,
)

#: The worked corner used throughout the tests and as the CLI default.
DEFAULT_CORNER = (
    (1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)),
    (0.0, 0.0, 1.0),
    (0.0, -1.0, 0.0),
)


class DegenerateCornerError(ValueError):
    """No habit plane cuts off the corner, so the slab would be unbounded."""


def _unit(v, name="vector"):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"{name} must be a nonzero finite vector")
    return v / n


@dataclass(frozen=True, eq=False)
class CornerDomain:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def edges(self):
        return np.stack([self.a, self.b, self.c])

    @property
    def det(self) -> float:
        return float(np.linalg.det(np.stack([self.a, self.b, self.c], axis=1)))

    @property
    def face_normals(self):
        """Inward unit normals of the faces spanned by (b,c), (c,a), (a,b)."""
        rows = []
        for u, v in ((self.b, self.c), (self.c, self.a), (self.a, self.b)):
            cr = np.cross(u, v)
            rows.append(cr / np.linalg.norm(cr))
        return np.stack(rows)

    def boundary_distance(self, x):
        """Signed distance to the nearest face plane; ``>= r`` iff the ball of radius r fits."""
        x = np.asarray(x, dtype=float)
        return np.min((x - self.origin) @ self.face_normals.T, axis=-1)

    def contains(self, x, tol: float = 0.0):
        return self.boundary_distance(x) >= -tol


def validate_corner(a, b, c, origin=None) -> CornerDomain:
    """Normalise the edge vectors and swap ``b``/``c`` if needed for positive order."""
    a, b, c = _unit(a, "a"), _unit(b, "b"), _unit(c, "c")
    det = float(np.linalg.det(np.stack([a, b, c], axis=1)))
    if abs(det) <= 1e-9:
        raise ValueError("corner edge vectors are coplanar")
    if det < 0:
        b, c = c, b
    o = np.zeros(3) if origin is None else np.asarray(origin, dtype=float)
    return CornerDomain(a, b, c, o)


def mu(domain: CornerDomain) -> float:
    """Smallest normalised triple product; lies in (0, 1] for a valid corner."""
    a, b, c = domain.a, domain.b, domain.c
    terms = []
    for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
        cr = np.cross(u, v)
        terms.append(float(cr @ w) / float(np.linalg.norm(cr)))
    return min(terms)


def find_habit_normal(domain: CornerDomain, tol: float = 1e-12):
    """First tabulated twin normal cutting off the corner, oriented into it; else None."""
    E = domain.edges
    for i, j in TWIN_TABLE_ORDER:
        n = twin_normal(i, j)
        s = E @ n
        if np.all(s > tol):
            return n
        if np.all(s < -tol):
            return -n
    return None


def _cubic_rotations():
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            Q = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                Q[row, col] = s
            if np.linalg.det(Q) > 0:
                mats.append(Q)
    return mats


CUBIC_ROTATIONS = _cubic_rotations()


def _variant_image(Q, k: int) -> int:
    """Index ``p`` with ``Q^T e(k) Q = e(p)``."""
    E = Q.T @ variant_strain(k) @ Q
    for p in (1, 2, 3):
        if np.allclose(E, variant_strain(p)):
            return p
    raise AssertionError("cubic rotation does not permute the variants")


@dataclass(frozen=True, eq=False)
class HabitFrame:
    n: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    rotation: np.ndarray
    variants: tuple[int, int]
    gradients: ConstructionGradients

    @property
    def basis(self):
        return np.stack([self.b1, self.b2, self.b3], axis=1)

    @property
    def dual(self):
        """Rows are the dual vectors b^1, b^2, b^3 (so ``dual @ basis = I``)."""
        return np.linalg.inv(self.basis)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.basis))

    @property
    def jacobian(self) -> float:
        return abs(self.det)

    def to_chart(self, x, z):
        return (np.asarray(x, dtype=float) - z) @ self.dual.T

    def from_chart(self, y, z):
        return np.asarray(y, dtype=float) @ self.basis.T + z


def build_frame(n) -> HabitFrame:
    """Construction frame for a tabulated habit normal (either orientation).

    The frame is first built for ``n = b32`` (variants 1, 2, in-plane twin
    normal ``b21``) and then transported by the cubic rotation ``Q`` that maps
    ``n`` onto ``b32``; the variants and gradients are relabelled accordingly.
    """
    n = np.asarray(n, dtype=float)
    if not any(np.allclose(n, s * twin_normal(i, j), atol=1e-9)
               for i, j in TWIN_TABLE_ORDER for s in (1.0, -1.0)):
        raise ValueError(f"{n} is not a normal of the twin table")

    n_c = twin_normal(3, 2)
    b21 = twin_normal(2, 1)
    b3 = np.cross(b21, n_c)
    b3 /= np.linalg.norm(b3)
    b2 = np.cross(n_c, b3)
    b2 /= np.linalg.norm(b2)
    b1 = np.cross(b3, b21)
    b1 /= np.linalg.norm(b1)

    Q = next(R for R in CUBIC_ROTATIONS if np.allclose(R @ n, n_c, atol=1e-9))
    g = construction_gradients()
    grads = ConstructionGradients(Q.T @ g.D1 @ Q, Q.T @ g.D2 @ Q, Q.T @ g.DM @ Q)
    return HabitFrame(
        n=Q.T @ n_c,
        b1=Q.T @ b1,
        b2=Q.T @ b2,
        b3=Q.T @ b3,
        rotation=Q,
        variants=(_variant_image(Q, 1), _variant_image(Q, 2)),
        gradients=grads,
    )


def frame_for_domain(domain: CornerDomain) -> HabitFrame:
    n = find_habit_normal(domain)
    if n is None:
        raise DegenerateCornerError(
            "no habit plane cuts off this corner (e.g. the coordinate octant); "
            "the corner construction does not apply"
        )
    return build_frame(n)


def _check_orientation(domain: CornerDomain, n) -> np.ndarray:
    s = domain.edges @ np.asarray(n, dtype=float)
    if not np.all(s > 0):
        raise DegenerateCornerError(
            "habit normal does not cut off the corner; Ω ∩ {x·n ≤ t} is unbounded"
        )
    return s


def slab_vertices(domain: CornerDomain, n, t: float):
    """Vertices of the tetrahedron ``Ω ∩ {(x - origin)·n ≤ t}``."""
    s = _check_orientation(domain, n)
    verts = [domain.origin.copy()]
    for e, se in zip(domain.edges, s):
        verts.append(domain.origin + t * e / se)
    return np.stack(verts)


def slab_unit_volume(domain: CornerDomain, n) -> float:
    """Exact ``|Ω ∩ {(x - origin)·n ≤ 1}|`` (a tetrahedron)."""
    s = _check_orientation(domain, n)
    return abs(domain.det) / (6.0 * float(np.prod(s)))


@dataclass(frozen=True, eq=False)
class SlabPlacement:
    R: float
    z: np.ndarray
    t: float
    V: float
    nu: float
    depth: float
    extents: tuple[float, float]

    @property
    def R_over_cuberoot_V(self) -> float:
        return self.R / self.V ** (1.0 / 3.0)


def place_slab(domain: CornerDomain, frame: HabitFrame, V: float, margin: float = 0.01) -> SlabPlacement:
    """Habit-plane offset ``t`` with slab volume ``V`` and the enclosing box ``C_R``.

    ``z`` lies on the habit plane, so ``{y1 = 0}`` is the austenite interface and
    the slab occupies ``-R <= y1 <= 0``, ``0 <= y2, y3 <= R``.
    """
    if not V > 0:
        raise ValueError(f"volume must be positive, got {V}")
    nu = slab_unit_volume(domain, frame.n)
    t = (V / nu) ** (1.0 / 3.0)
    verts = slab_vertices(domain, frame.n, t)
    y = (verts - domain.origin) @ frame.dual.T
    lo, hi = y.min(axis=0), y.max(axis=0)
    depth = t / float(frame.n @ frame.b1)
    ext2, ext3 = hi[1] - lo[1], hi[2] - lo[2]
    R = (1.0 + margin) * max(depth, ext2, ext3)
    # centre the slab in y2, y3 inside [0, R]
    shift = np.array([depth, lo[1] - 0.5 * (R - ext2), lo[2] - 0.5 * (R - ext3)])
    z = domain.origin + frame.basis @ shift
    return SlabPlacement(R=R, z=z, t=t, V=V, nu=nu, depth=depth, extents=(ext2, ext3))


def in_slab(domain: CornerDomain, n, t: float, x):
    x = np.asarray(x, dtype=float)
    return domain.contains(x) & ((x - domain.origin) @ np.asarray(n, dtype=float) <= t)


def _volume_chunk(args):
    seed_seq, lo, hi, strata_lo, strata_hi, m, domain, n, t = args
    rng = np.random.default_rng(seed_seq)
    idx = np.arange(strata_lo, strata_hi)
    cell = np.stack(np.unravel_index(idx, (m, m, m)), axis=1).astype(float)
    width = (hi - lo) / m
    hits = []
    for _ in range(2):
        pts = lo + (cell + rng.random(cell.shape)) * width
        hits.append(in_slab(domain, n, t, pts).astype(float))
    h1, h2 = hits
    return float(np.sum(h1 + h2) / 2.0), float(np.sum((h1 - h2) ** 2) / 4.0)


def estimate_volume(domain: CornerDomain, t: float, n=None, samples: int = 10**6,
                    seed: int = 0, workers: int = 1, chunk_strata: int = 1 << 15):
    """Stratified Monte-Carlo estimate of ``|Ω ∩ {(x - origin)·n ≤ t}|``.

    ``n`` defaults to the corner's habit normal and need not be unit length.
    Two samples per stratum; chunks get seeds spawned in a fixed order, so
    the result does not depend on ``workers``.  Returns ``(volume, stderr)``.
    """
    if n is None:
        n = find_habit_normal(domain)
        if n is None:
            raise DegenerateCornerError("no habit normal cuts off this corner")
    n = np.asarray(n, dtype=float)
    _check_orientation(domain, n)
    if t <= 0:
        return 0.0, 0.0
    verts = slab_vertices(domain, n, t)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    box = float(np.prod(hi - lo))
    m = max(1, int(round((samples / 2.0) ** (1.0 / 3.0))))
    total = m ** 3
    bounds = list(range(0, total, chunk_strata)) + [total]
    seqs = np.random.SeedSequence(seed).spawn(len(bounds) - 1)
    jobs = [(seqs[k], lo, hi, bounds[k], bounds[k + 1], m, domain, n, t)
            for k in range(len(bounds) - 1)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(_volume_chunk, jobs))
    else:
        parts = [_volume_chunk(j) for j in jobs]
    mean_sum = math.fsum(p[0] for p in parts)
    var_sum = math.fsum(p[1] for p in parts)
    vol = box * mean_sum / total
    err = box * math.sqrt(var_sum) / total
    return vol, err
