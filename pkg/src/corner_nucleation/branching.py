"""Self-similar branching decomposition of the martensite slab.

Chart coordinates ``y`` refer to the construction frame (see
:mod:`corner_nucleation.corner_geometry`).  The slab box is
``[-R, 0] x [0, R] x [0, R]``: a unit boundary layer ``-1 <= y1 <= 0`` of pure
variant 1 against the austenite, and below it the branching cells, stacked
from the coarsest generation at ``y1 = -R`` to the finest at ``y1 = -1``.

Inside a cell of width ``w`` and height ``h`` (local coordinates
``0 <= y1 <= h``, ``0 <= y2 <= w``) variant 1 occupies three stripes: a middle
stripe of width ``w/3`` at the coarse end that narrows linearly to ``w/9``,
and two side stripes that open from zero width to ``w/9``.  At the fine end
the pattern is three copies of the coarse end of a cell three times narrower,
so nine children sit above each parent.  Labels ``1``/``2`` below are
*construction* labels; :attr:`HabitFrame.variants` maps them to variant
indices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .corner_geometry import (
    CornerDomain,
    HabitFrame,
    SlabPlacement,
    frame_for_domain,
    in_slab,
    place_slab,
)


def stripe_intervals(y1, w, h):
    """Variant-1 intervals ``[(lo, hi), ...]`` of the slice at local height ``y1``.

    Written with integer coefficients only, so :class:`fractions.Fraction`
    inputs give exact results.
    """
    d = 18 * h
    return [
        (w * (3 * h - y1) / d, w * (3 * h + y1) / d),
        (w * (6 * h + 2 * y1) / d, w * (12 * h - 2 * y1) / d),
        (w * (15 * h - y1) / d, w * (15 * h + y1) / d),
    ]


def stripe_slopes(w, h):
    """``(d lo/d y1, d hi/d y1)`` for the three stripes."""
    side = w / (18.0 * h)
    mid = w / (9.0 * h)
    return [(-side, side), (mid, -mid), (-side, side)]


def base_cell_variant(y1: float, y2: float, w: float, h: float) -> int:
    """Construction label (1 or 2) at cell-local ``(y1, y2)``; stripes are closed sets."""
    if not (0 <= y1 <= h and 0 <= y2 <= w):
        raise ValueError(f"({y1}, {y2}) lies outside the cell [0, {h}] x [0, {w}]")
    for lo, hi in stripe_intervals(y1, w, h):
        if lo <= y2 <= hi:
            return 1
    return 2


def slice_fraction(y1, w, h):
    """Length fractions ``(f1, f2)`` of the two labels on the slice at height ``y1``."""
    if not (0 <= y1 <= h):
        raise ValueError(f"y1={y1} outside [0, {h}]")
    f1 = sum(hi - lo for lo, hi in stripe_intervals(y1, w, h)) / w
    return f1, 1 - f1


@dataclass(frozen=True)
class BranchingSchedule:
    R: float
    w: float
    K_side: int
    C1: float
    M: int
    widths: tuple[float, ...]
    heights: tuple[float, ...]
    y1_offsets: tuple[float, ...]
    unbranched: bool = False
    relaxed_stop: bool = False

    @property
    def K(self) -> int:
        return self.K_side ** 2

    @property
    def starts(self):
        return np.asarray(self.y1_offsets[:-1])

    @property
    def ends(self):
        return np.asarray(self.y1_offsets[1:])

    def cells_per_cylinder(self, i: int) -> int:
        return 9 ** i


def _ceil_cuberoot(R: float) -> int:
    k = max(1, math.ceil(R ** (1.0 / 3.0) - 1e-9))
    while k ** 3 < R:
        k += 1
    while k > 1 and (k - 1) ** 3 >= R:
        k -= 1
    return k


def build_schedule(R: float, max_generations: int = 64) -> BranchingSchedule:
    """Widths ``w_i = w 3^-i``, heights ``h_i = C1 w_i^{3/2}`` with ``sum h_i = R - 1``.

    ``M`` is the first generation whose cell is no taller than wide.  If the
    coupled (C1, M) system has no exact solution, the smallest ``M`` with
    ``h_M <= w_M`` is used and ``relaxed_stop`` is set.
    """
    if not R > 1:
        raise ValueError(f"slab depth must exceed 1, got R={R}")
    K_side = _ceil_cuberoot(R)
    w = R / K_side
    widths = [w / 3.0 ** i for i in range(max_generations + 1)]
    powers = [wi ** 1.5 for wi in widths]

    chosen, relaxed = None, False
    first_stop = None
    for M in range(max_generations + 1):
        C1 = (R - 1.0) / math.fsum(powers[: M + 1])
        stop_here = C1 * powers[M] <= widths[M]
        if stop_here and first_stop is None:
            first_stop = M
        if stop_here and (M == 0 or C1 * powers[M - 1] > widths[M - 1]):
            chosen = M
            break
    if chosen is None:
        if first_stop is None:
            raise RuntimeError(f"no stopping generation found for R={R}")
        chosen, relaxed = first_stop, True
        warnings.warn(f"R={R}: stop criterion relaxed at M={chosen}", stacklevel=2)

    M = chosen
    C1 = (R - 1.0) / math.fsum(powers[: M + 1])
    heights = tuple(C1 * p for p in powers[: M + 1])
    offsets = [-R]
    for h in heights:
        offsets.append(offsets[-1] + h)
    offsets[-1] = -1.0
    return BranchingSchedule(
        R=R, w=w, K_side=K_side, C1=C1, M=M,
        widths=tuple(widths[: M + 1]), heights=heights, y1_offsets=tuple(offsets),
        unbranched=(M == 0), relaxed_stop=relaxed,
    )


def trace_mismatch(schedule: BranchingSchedule, child_shift: float = 0.0) -> float:
    """Largest y2-length on which a parent's fine end disagrees with its children.

    ``child_shift`` (a fraction of the child width) displaces the children; it
    exists only to show that a misplacement is detected.
    """
    worst = 0.0
    for i in range(schedule.M):
        w, h = schedule.widths[i], schedule.heights[i]
        wc, hc = schedule.widths[i + 1], schedule.heights[i + 1]
        parent = stripe_intervals(h, w, h)
        children = []
        for k in range(3):
            off = k * wc + child_shift * wc
            children += [(lo + off, hi + off) for lo, hi in stripe_intervals(0.0, wc, hc)]
        worst = max(worst, _symmetric_difference_length(parent, children, 0.0, w))
    return worst


def _symmetric_difference_length(A, B, lo, hi, rel_tol=1e-12):
    snap = rel_tol * (hi - lo)
    cuts = []
    for x in sorted({lo, hi, *[x for iv in A + B for x in iv if lo < x < hi]}):
        if not cuts or x - cuts[-1] > snap:
            cuts.append(x)
    total = 0.0
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (x0 + x1)
        inA = any(a <= mid <= b for a, b in A)
        inB = any(a <= mid <= b for a, b in B)
        if inA != inB:
            total += x1 - x0
    return total


@dataclass(frozen=True, eq=False)
class PhasePoint:
    chi1: int
    chi2: int
    chi3: int

    def as_tuple(self):
        return (self.chi1, self.chi2, self.chi3)


@dataclass(frozen=True, eq=False)
class CellLocation:
    """Vectorised cell lookup for chart points (interior points only)."""

    generation: np.ndarray
    y1_local: np.ndarray
    y2_local: np.ndarray
    width: np.ndarray
    height: np.ndarray


@dataclass(frozen=True, eq=False)
class BranchingLayout:
    """Cell decomposition of the box ``C_R`` placed in a corner.

    ``domain``/``placement`` may be ``None`` for a bare box built from ``R``;
    the configuration is then the box configuration (variant labels inside
    ``[-R, 0] x [0, R]^2``, austenite elsewhere).
    """

    frame: HabitFrame
    schedule: BranchingSchedule
    z: np.ndarray
    domain: CornerDomain | None = None
    placement: SlabPlacement | None = None

    @property
    def R(self) -> float:
        return self.schedule.R

    @classmethod
    def from_depth(cls, R: float, frame: HabitFrame, z=None) -> "BranchingLayout":
        return cls(frame, build_schedule(R), np.zeros(3) if z is None else np.asarray(z, float))

    def to_chart(self, x):
        return self.frame.to_chart(x, self.z)

    def from_chart(self, y):
        return self.frame.from_chart(y, self.z)

    def in_box(self, y):
        y = np.atleast_2d(y)
        R = self.R
        return ((y[:, 0] >= -R) & (y[:, 0] <= 0) & (y[:, 1] >= 0) & (y[:, 1] <= R)
                & (y[:, 2] >= 0) & (y[:, 2] <= R))

    def in_martensite(self, x, clip: bool = True):
        """Support of the construction: the slab in Ω (``clip``) or the box."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if clip and self.domain is not None:
            return in_slab(self.domain, self.frame.n, self.placement.t, x)
        return self.in_box(self.to_chart(x))

    def locate(self, y) -> CellLocation:
        """Cell data for chart points with ``-R <= y1 < -1`` (not checked)."""
        y = np.atleast_2d(y)
        s = self.schedule
        ends = s.ends
        gen = np.clip(np.searchsorted(ends, y[:, 0], side="right"), 0, s.M)
        starts = s.starts[gen]
        width = np.asarray(s.widths)[gen]
        height = np.asarray(s.heights)[gen]
        y1l = np.clip(y[:, 0] - starts, 0.0, height)
        y2l = y[:, 1] - np.floor(y[:, 1] / width) * width
        return CellLocation(gen, y1l, y2l, width, height)

    def labels_chart(self, y, mask=None):
        """Construction labels (0 austenite, 1, 2) at chart points.

        ``mask`` restricts the martensite support (e.g. the slab in Ω); by
        default the support is the box.  On a stripe wall the label of the
        side with smaller ``y2`` is returned.
        """
        y = np.atleast_2d(np.asarray(y, dtype=float))
        support = self.in_box(y) if mask is None else mask
        lab = np.zeros(len(y), dtype=np.int8)
        layer = support & (y[:, 0] >= -1.0)
        interior = support & (y[:, 0] < -1.0)
        lab[layer] = 1
        if np.any(interior):
            loc = self.locate(y[interior])
            inside = _inside_any(loc.y1_local, loc.y2_local, loc.width, loc.height)
            lab[interior] = np.where(inside, 1, 2)
        return lab

    def labels(self, x, clip: bool = True):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = self.to_chart(x)
        mask = self.in_martensite(x, clip=clip)
        return self.labels_chart(y, mask & self.in_box(y))

    def phase(self, x, clip: bool = True):
        """Variant index (0..3) at each point."""
        lookup = np.array([0, *self.frame.variants], dtype=np.int8)
        return lookup[self.labels(x, clip=clip)]

    def summary(self) -> dict:
        s = self.schedule
        out = {
            "R": float(s.R), "w": float(s.w), "C1": float(s.C1), "M": s.M, "K_side": s.K_side,
            "widths": [float(v) for v in s.widths], "heights": [float(v) for v in s.heights],
            "unbranched": s.unbranched, "relaxed_stop": s.relaxed_stop,
            "variants": list(self.frame.variants),
            "frame": {k: getattr(self.frame, k).tolist() for k in ("n", "b1", "b2", "b3")},
        }
        if self.placement is not None:
            p = self.placement
            out.update({"V": float(p.V), "t": float(p.t), "z": p.z.tolist(),
                        "R_over_cuberoot_V": float(p.R_over_cuberoot_V)})
        return out


def _inside_any(y1l, y2l, w, h):
    """Left-limit stripe membership ``lo < y2 <= hi`` for arrays."""
    inside = np.zeros(np.shape(y2l), dtype=bool)
    for lo, hi in stripe_intervals(y1l, w, h):
        inside |= (y2l > lo) & (y2l <= hi)
    return inside


def build_layout(domain: CornerDomain, V: float, frame: HabitFrame | None = None,
                 margin: float = 0.01) -> BranchingLayout:
    """Place a slab of volume ``V > 1`` in the corner and decompose it."""
    frame = frame_for_domain(domain) if frame is None else frame
    placement = place_slab(domain, frame, V, margin=margin)
    return BranchingLayout(frame, build_schedule(placement.R), placement.z, domain, placement)


def chi_at(layout: BranchingLayout, x, clip: bool = True) -> PhasePoint:
    """Phase indicator at a single point."""
    p = int(layout.phase(np.asarray(x, dtype=float)[None, :], clip=clip)[0])
    return PhasePoint(int(p == 1), int(p == 2), int(p == 3))
