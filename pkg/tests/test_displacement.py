import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corner_nucleation.checks import continuity_defect, finite_difference_check, habit_plane_alignment
from corner_nucleation.displacement import (
    cell_field_constants,
    energy_density,
    evaluate_chart,
    grad_u_micro_at,
    micro_profile,
    u_micro_at,
    u_total_at,
    y1_derivative_constant,
)
from corner_nucleation.strain_algebra import twin_normal


def test_cell_slopes(frame):
    cf = cell_field_constants(frame)
    b12 = twin_normal(1, 2)
    np.testing.assert_allclose(cf.slope1, 2 * math.sqrt(3) * b12, atol=1e-14)
    np.testing.assert_allclose(cf.slope2, -math.sqrt(3) * b12, atol=1e-14)
    assert max(cf.residuals(frame).values()) < 1e-14


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0.1, 20), st.floats(0.1, 20))
def test_micro_profile_vanishes_on_cell_walls(t, w, h):
    cf_s1, cf_s2 = np.array([1.0, 2.0, 3.0]), np.array([-0.5, -1.0, -1.5])
    u0, _, _ = micro_profile(t * h, 0.0, w, h, cf_s1, cf_s2)
    uw, _, _ = micro_profile(t * h, w, w, h, cf_s1, cf_s2)
    assert np.abs(u0).max() == 0.0
    assert np.abs(uw).max() <= 1e-12 * w * 3.8


def test_y1_derivative_bounded(frame, box_layout, rng):
    C = y1_derivative_constant(frame)
    cf = cell_field_constants(frame)
    s = box_layout.schedule
    for w, h in zip(s.widths, s.heights):
        y1 = rng.uniform(0, h, 500)
        y2 = rng.uniform(0, w, 500)
        _, du1, _ = micro_profile(y1, y2, w, h, cf.slope1, cf.slope2)
        assert np.linalg.norm(du1, axis=1).max() <= C * w / h * (1 + 1e-12)


def test_misfit_is_y1_part_only(box_layout, rng):
    R = box_layout.R
    y = rng.uniform([-R, 0, 0], [-1.0, R, R], size=(2000, 3))
    smp = evaluate_chart(box_layout, y, clip=False)
    dens = energy_density(box_layout, smp)
    loc = box_layout.locate(y)
    cf = cell_field_constants(box_layout.frame)
    _, du1, _ = micro_profile(loc.y1_local, loc.y2_local, loc.width, loc.height, cf.slope1, cf.slope2)
    m = 0.5 * (np.einsum("ni,j->nij", du1, box_layout.frame.dual[0]))
    m = m + np.swapaxes(m, 1, 2)
    np.testing.assert_allclose(dens, np.einsum("nij,nij->n", m, m), atol=1e-10)


def test_two_sided_continuity(layout_1e4):
    worst, _, _ = continuity_defect(layout_1e4, n=400, seed=1)
    assert worst < 1e-10


def test_finite_differences(layout_1e4):
    assert finite_difference_check(layout_1e4, n=300, seed=2).max_relative_error < 1e-4


def test_habit_plane_alignment(layout_1e4):
    assert habit_plane_alignment(layout_1e4, n=500) < 1e-10


def test_point_helpers(layout_1e4):
    p = layout_1e4.placement
    y = np.array([-p.R / 2, p.R / 3, p.R / 2])
    x = layout_1e4.from_chart(y[None, :])[0]
    um = u_micro_at(layout_1e4, x)
    tot = u_total_at(layout_1e4, x, clip=False)
    DM = layout_1e4.frame.gradients.DM
    np.testing.assert_allclose(tot.u, um + DM @ (x - layout_1e4.z), atol=1e-12)
    G = grad_u_micro_at(layout_1e4, x)
    np.testing.assert_allclose(tot.grad, G + DM, atol=1e-12)
    with pytest.raises(ValueError):
        u_micro_at(layout_1e4, layout_1e4.from_chart(np.array([[-0.5, 1.0, 1.0]]))[0])


def test_outside_support_is_zero(box_layout):
    smp = evaluate_chart(box_layout, np.array([[1.0, 2.0, 2.0]]), clip=False)
    assert smp.labels[0] == 0 and not smp.u.any() and not smp.grad.any()
