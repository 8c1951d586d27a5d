"""Sampling checks of the assembled displacement field on the construction box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .branching import BranchingLayout, stripe_intervals
from .displacement import evaluate, evaluate_chart


@dataclass(frozen=True)
class FacePoints:
    y: np.ndarray        # chart points on internal faces
    normal: np.ndarray   # chart direction crossing the face
    kind: np.ndarray     # 0 stripe wall, 1 generation interface, 2 cell wall, 3 habit plane


def sample_face_points(layout: BranchingLayout, n: int, seed: int = 0) -> FacePoints:
    """Random points on the internal faces of the box configuration."""
    rng = np.random.default_rng(seed)
    s = layout.schedule
    R = s.R
    e1, e2 = [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]

    def draw(kind, y3):
        if kind == 0:
            i = int(rng.integers(0, s.M + 1))
            w, h = s.widths[i], s.heights[i]
            k = int(rng.integers(0, int(round(R / w))))
            y1l = rng.uniform(0.05, 0.95) * h
            lo, hi = stripe_intervals(y1l, w, h)[int(rng.integers(0, 3))]
            wall = lo if rng.random() < 0.5 else hi
            return [s.starts[i] + y1l, k * w + wall, y3], e2, 0
        if kind == 2:
            i = int(rng.integers(0, s.M + 1))
            ncell = int(round(R / s.widths[i]))
            if ncell >= 2:
                k = int(rng.integers(1, ncell))
                y1 = s.starts[i] + rng.uniform(0.05, 0.95) * s.heights[i]
                return [y1, k * s.widths[i], y3], e2, 2
            kind = 1
        if kind == 1:
            i = int(rng.integers(1, s.M + 2))
            return [s.y1_offsets[i], rng.uniform(0.01, 0.99) * R, y3], e1, 1
        return [0.0, rng.uniform(0.01, 0.99) * R, y3], e1, 3

    out = [draw(int(kind), rng.uniform(0.1, 0.9) * R) for kind in rng.integers(0, 4, size=n)]
    ys, normals, kinds = zip(*out)
    return FacePoints(np.asarray(ys), np.asarray(normals), np.asarray(kinds))


def continuity_defect(layout: BranchingLayout, n: int = 1000, seed: int = 0, eps: float = 1e-12):
    """Largest jump of ``u`` between the two sides of sampled faces, and the points."""
    fp = sample_face_points(layout, n, seed)
    plus = evaluate_chart(layout, fp.y + eps * fp.normal, clip=False).u
    minus = evaluate_chart(layout, fp.y - eps * fp.normal, clip=False).u
    jump = np.linalg.norm(plus - minus, axis=1)
    return float(jump.max()), fp, jump


def _distance_to_interfaces(layout: BranchingLayout, y):
    """Chart distance from each point to the nearest y1-level or stripe wall."""
    s = layout.schedule
    d1 = np.min(np.abs(y[:, 0:1] - np.asarray(s.y1_offsets + (0.0,))[None, :]), axis=1)
    interior = y[:, 0] < -1.0
    d2 = np.full(len(y), np.inf)
    if np.any(interior):
        loc = layout.locate(y[interior])
        walls = [0.0 * loc.width, loc.width]
        for lo, hi in stripe_intervals(loc.y1_local, loc.width, loc.height):
            walls += [lo, hi]
        d2[interior] = np.min(np.abs(np.stack(walls) - loc.y2_local), axis=0)
    layer = ~interior
    if np.any(layer):
        wM, hM = s.widths[-1], s.heights[-1]
        y2l = y[layer, 1] - np.floor(y[layer, 1] / wM) * wM
        walls = [0.0 * y2l, np.full_like(y2l, wM)]
        for lo, hi in stripe_intervals(hM, wM, hM):
            walls += [np.full_like(y2l, lo), np.full_like(y2l, hi)]
        d2[layer] = np.min(np.abs(np.stack(walls) - y2l), axis=0)
    return np.minimum(d1, d2)


@dataclass(frozen=True)
class GradientCheck:
    max_relative_error: float
    points: int


def finite_difference_check(layout: BranchingLayout, n: int = 1000, seed: int = 0,
                            step: float = 1e-6, margin: float = 1e-4) -> GradientCheck:
    """Central differences of ``u`` against the assembled gradient away from interfaces."""
    rng = np.random.default_rng(seed)
    R = layout.R
    pts = []
    while sum(len(p) for p in pts) < n:
        y = rng.uniform([-R, 0, 0], [0, R, R], size=(2 * n, 3))
        y = y[_distance_to_interfaces(layout, y) > margin]
        y = y[(y[:, 1] > margin) & (y[:, 1] < R - margin) & (y[:, 0] > -R + margin) & (y[:, 0] < -margin)]
        pts.append(y)
    y = np.concatenate(pts)[:n]
    x = layout.from_chart(y)
    G = evaluate(layout, x, clip=False).grad
    fd = np.zeros_like(G)
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        up = evaluate(layout, x + e, clip=False).u
        dn = evaluate(layout, x - e, clip=False).u
        fd[:, :, k] = (up - dn) / (2 * step)
    err = np.linalg.norm(fd - G, axis=(1, 2)) / np.maximum(np.linalg.norm(G, axis=(1, 2)), 1e-300)
    return GradientCheck(float(err.max()), len(y))


def habit_plane_alignment(layout: BranchingLayout, n: int = 1000, seed: int = 0) -> float:
    """``max |DM (x - z)|`` over random points of the habit plane ``y1 = 0``."""
    rng = np.random.default_rng(seed)
    R = layout.R
    y = np.column_stack([np.zeros(n), rng.uniform(0, R, n), rng.uniform(0, R, n)])
    x = layout.from_chart(y)
    DM = layout.frame.gradients.DM
    return float(np.max(np.linalg.norm((x - layout.z) @ DM.T, axis=1)))
