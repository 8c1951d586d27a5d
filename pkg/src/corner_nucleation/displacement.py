"""Displacement field of the branching construction.

Inside a cell the microscopic displacement only depends on the local
``(y1, y2)``::

    ũ(y1, y2) = L1 * slope1 + (y2 - L1) * slope2,    L1 = |[0, y2] ∩ stripes(y1)|

so ``∂ũ/∂y2`` is ``slope1`` on variant-1 stripes and ``slope2`` elsewhere,
``ũ`` vanishes on the cell walls ``y2 ∈ {0, w}`` (each slice is one third
variant 1) and ``∂ũ/∂y1`` is piecewise constant with values
``(slope1 - slope2) * {0, ±w/18h, ±w/9h}``.  The macroscopic part is
``DM (x - z)`` with ``z`` on the habit plane.  In the boundary layer
``-1 <= y1 <= 0`` the microscopic part is blended linearly to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .branching import BranchingLayout, stripe_intervals, stripe_slopes
from .corner_geometry import HabitFrame
from .strain_algebra import sym, variant_strain


@dataclass(frozen=True, eq=False)
class CellField:
    slope1: np.ndarray
    slope2: np.ndarray

    def residuals(self, frame: HabitFrame) -> dict[str, float]:
        g = frame.gradients
        A1, A2 = g.D1 - g.DM, g.D2 - g.DM
        return {
            "zero_mean": float(np.linalg.norm(self.slope1 / 3 + 2 * self.slope2 / 3)),
            "b1_kernel": float(max(np.linalg.norm(A1 @ frame.b1), np.linalg.norm(A2 @ frame.b1))),
            "b3_kernel": float(max(np.linalg.norm(A1 @ frame.b3), np.linalg.norm(A2 @ frame.b3))),
        }


def cell_field_constants(frame: HabitFrame, tol: float = 1e-12) -> CellField:
    g = frame.gradients
    cf = CellField((g.D1 - g.DM) @ frame.b2, (g.D2 - g.DM) @ frame.b2)
    bad = {k: v for k, v in cf.residuals(frame).items() if v > tol}
    if bad:
        raise ValueError(f"frame is inconsistent with the construction gradients: {bad}")
    return cf


def micro_profile(y1l, y2l, w, h, slope1, slope2):
    """``(ũ, ∂ũ/∂y1, ∂ũ/∂y2)`` at cell-local points (arrays broadcast together).

    On a stripe wall the one-sided limit from smaller ``y2`` is used.
    """
    y1l = np.asarray(y1l, dtype=float)
    y2l = np.asarray(y2l, dtype=float)
    L1 = np.zeros(np.broadcast(y1l, y2l).shape)
    dL1 = np.zeros_like(L1)
    inside = np.zeros(L1.shape, dtype=bool)
    for (lo, hi), (dlo, dhi) in zip(stripe_intervals(y1l, w, h), stripe_slopes(w, h)):
        L1 += np.clip(y2l - lo, 0.0, hi - lo)
        ins = (y2l > lo) & (y2l <= hi)
        above = y2l > hi
        dL1 += np.where(ins, -dlo, np.where(above, dhi - dlo, 0.0))
        inside |= ins
    slope1 = np.asarray(slope1, dtype=float)
    slope2 = np.asarray(slope2, dtype=float)
    jump = slope1 - slope2
    u = L1[..., None] * slope1 + (y2l - L1)[..., None] * slope2
    du1 = dL1[..., None] * jump
    du2 = np.where(inside[..., None], slope1, slope2)
    return u, du1, du2


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Vectorised field data: labels, displacement, gradient (Cartesian)."""

    labels: np.ndarray
    u: np.ndarray
    grad: np.ndarray


def evaluate(layout: BranchingLayout, x, clip: bool = True) -> FieldSample:
    """Labels, total displacement and its gradient at points ``x`` (N, 3)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = layout.to_chart(x)
    support = layout.in_martensite(x, clip=clip) & layout.in_box(y)
    return _evaluate_chart(layout, x, y, support)


def evaluate_chart(layout: BranchingLayout, y, clip: bool = True) -> FieldSample:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x = layout.from_chart(y)
    support = layout.in_martensite(x, clip=clip) & layout.in_box(y)
    return _evaluate_chart(layout, x, y, support)


def _evaluate_chart(layout, x, y, support) -> FieldSample:
    frame = layout.frame
    s = layout.schedule
    cf = cell_field_constants(frame)
    dual = frame.dual
    bup1, bup2 = dual[0], dual[1]
    DM = frame.gradients.DM

    N = len(y)
    labels = layout.labels_chart(y, support)
    u = np.zeros((N, 3))
    grad = np.zeros((N, 3, 3))

    interior = support & (y[:, 0] < -1.0)
    if np.any(interior):
        loc = layout.locate(y[interior])
        um, du1, du2 = micro_profile(loc.y1_local, loc.y2_local, loc.width, loc.height,
                                     cf.slope1, cf.slope2)
        u[interior] = um + (x[interior] - layout.z) @ DM.T
        grad[interior] = DM + np.einsum("ni,j->nij", du1, bup1) + np.einsum("ni,j->nij", du2, bup2)

    layer = support & (y[:, 0] >= -1.0)
    if np.any(layer):
        wM, hM = s.widths[-1], s.heights[-1]
        y2l = y[layer, 1] - np.floor(y[layer, 1] / wM) * wM
        top, _, dtop2 = micro_profile(np.full(y2l.shape, hM), y2l, wM, hM, cf.slope1, cf.slope2)
        lam = -y[layer, 0]
        u[layer] = lam[:, None] * top + (x[layer] - layout.z) @ DM.T
        grad[layer] = (DM - np.einsum("ni,j->nij", top, bup1)
                       + np.einsum("ni,j->nij", lam[:, None] * dtop2, bup2))
    return FieldSample(labels, u, grad)


def strain_targets(layout: BranchingLayout, labels):
    """Stress-free strain ``Σ χ_i e(i)`` for construction labels."""
    table = np.stack([variant_strain(0)] + [variant_strain(p) for p in layout.frame.variants])
    return table[labels]


def energy_density(layout: BranchingLayout, sample: FieldSample):
    mis = sym(sample.grad) - strain_targets(layout, sample.labels)
    return np.einsum("nij,nij->n", mis, mis)


@dataclass(frozen=True, eq=False)
class DisplacementSample:
    u: np.ndarray
    grad: np.ndarray


def u_total_at(layout: BranchingLayout, x, clip: bool = True) -> DisplacementSample:
    s = evaluate(layout, np.asarray(x, dtype=float)[None, :], clip=clip)
    return DisplacementSample(s.u[0], s.grad[0])


def _interior_location(layout: BranchingLayout, x):
    y = layout.to_chart(np.asarray(x, dtype=float)[None, :])
    if not (layout.in_box(y)[0] and y[0, 0] < -1.0):
        raise ValueError("point is not in the interior cell region")
    return y, layout.locate(y)


def u_micro_at(layout: BranchingLayout, x):
    """Microscopic displacement ũ at an interior point."""
    _, loc = _interior_location(layout, x)
    cf = cell_field_constants(layout.frame)
    u, _, _ = micro_profile(loc.y1_local, loc.y2_local, loc.width, loc.height, cf.slope1, cf.slope2)
    return u[0]


def grad_u_micro_at(layout: BranchingLayout, x):
    """Cartesian gradient of ũ at an interior point (smaller-y2 side on walls)."""
    _, loc = _interior_location(layout, x)
    cf = cell_field_constants(layout.frame)
    dual = layout.frame.dual
    _, du1, du2 = micro_profile(loc.y1_local, loc.y2_local, loc.width, loc.height, cf.slope1, cf.slope2)
    return np.outer(du1[0], dual[0]) + np.outer(du2[0], dual[1])


def y1_derivative_constant(frame: HabitFrame) -> float:
    """``C`` with ``|∂ũ/∂y1| <= C w/h`` in every cell."""
    cf = cell_field_constants(frame)
    return float(np.linalg.norm(cf.slope1 - cf.slope2)) / 9.0
