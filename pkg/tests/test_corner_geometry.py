import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corner_nucleation.corner_geometry import (
    CUBIC_ROTATIONS,
    DEFAULT_CORNER,
    DegenerateCornerError,
    build_frame,
    estimate_volume,
    find_habit_normal,
    frame_for_domain,
    mu,
    place_slab,
    slab_unit_volume,
    slab_vertices,
    validate_corner,
)
from corner_nucleation.strain_algebra import TWIN_TABLE_ORDER, sym, twin_normal, variant_strain


def test_default_corner_values(domain):
    assert domain.det > 0
    assert mu(domain) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    np.testing.assert_allclose(find_habit_normal(domain), twin_normal(3, 2), atol=1e-15)


def test_validate_swaps_to_positive_order():
    a, b, c = DEFAULT_CORNER
    d = validate_corner(a, c, b)
    assert d.det > 0
    with pytest.raises(ValueError):
        validate_corner((1, 0, 0), (0, 1, 0), (1, 1, 0))
    with pytest.raises(ValueError):
        validate_corner((0, 0, 0), (0, 1, 0), (0, 0, 1))


def test_coordinate_corner_refused():
    d = validate_corner((1, 0, 0), (0, 1, 0), (0, 0, 1))
    assert find_habit_normal(d) is None
    with pytest.raises(DegenerateCornerError):
        frame_for_domain(d)


def test_frame_for_b32(frame):
    s3, s6 = math.sqrt(3), math.sqrt(6)
    np.testing.assert_allclose(frame.b3, np.ones(3) / s3, atol=1e-15)
    np.testing.assert_allclose(frame.b2, np.array([-2, 1, 1]) / s6, atol=1e-15)
    np.testing.assert_allclose(frame.b1, np.array([-1, -1, 2]) / s6, atol=1e-15)
    assert frame.det == pytest.approx(-s3 / 2, abs=1e-14)
    assert frame.b1 @ frame.n == pytest.approx(s3 / 2)
    assert frame.variants == (1, 2)
    np.testing.assert_allclose(frame.dual @ frame.basis, np.eye(3), atol=1e-14)


def test_chart_round_trip(frame, rng):
    z = rng.normal(size=3)
    x = rng.normal(size=(50, 3))
    np.testing.assert_allclose(frame.from_chart(frame.to_chart(x, z), z), x, atol=1e-13)


@pytest.mark.parametrize("ij", TWIN_TABLE_ORDER)
@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_transported_frames_consistent(ij, sign):
    n = sign * twin_normal(*ij)
    f = build_frame(n)
    np.testing.assert_allclose(f.n, n, atol=1e-14)
    g = f.gradients
    p1, p2 = f.variants
    assert np.allclose(sym(g.D1), variant_strain(p1))
    assert np.allclose(sym(g.D2), variant_strain(p2))
    # the macroscopic gradient annihilates the habit plane
    assert np.linalg.norm(g.DM @ f.b2) < 1e-14 and np.linalg.norm(g.DM @ f.b3) < 1e-14


def test_build_frame_rejects_other_normals():
    with pytest.raises(ValueError):
        build_frame(np.array([1.0, 0.0, 0.0]))


def test_cubic_rotations():
    assert len(CUBIC_ROTATIONS) == 24
    for Q in CUBIC_ROTATIONS:
        np.testing.assert_allclose(Q @ Q.T, np.eye(3))


def test_slab_volume_exact_vs_monte_carlo(domain):
    n = find_habit_normal(domain)
    exact = slab_unit_volume(domain, n)
    est, err = estimate_volume(domain, 1.0, n, samples=200_000, seed=3)
    assert abs(est - exact) < 4 * err + 1e-3 * exact


def test_monte_carlo_independent_of_workers(domain):
    a = estimate_volume(domain, 2.0, samples=20_000, seed=5, workers=1, chunk_strata=1000)
    b = estimate_volume(domain, 2.0, samples=20_000, seed=5, workers=3, chunk_strata=1000)
    assert a == b


def test_slab_vertices_on_habit_plane(domain):
    n = find_habit_normal(domain)
    v = slab_vertices(domain, n, 2.5)
    np.testing.assert_allclose(v[1:] @ n, 2.5)


@pytest.mark.parametrize("V", [2.0, 1e3, 1e6])
def test_place_slab(domain, frame, V):
    p = place_slab(domain, frame, V)
    assert p.nu * p.t ** 3 == pytest.approx(V, rel=1e-12)
    assert p.R_over_cuberoot_V == pytest.approx(3.1788186, rel=1e-6)
    verts = slab_vertices(domain, frame.n, p.t)
    y = frame.to_chart(verts, p.z)
    assert np.all(y[:, 0] >= -p.R) and np.all(y[:, 0] <= 1e-9 * p.R)
    assert np.all(y[:, 1:] >= 0) and np.all(y[:, 1:] <= p.R)


def test_place_slab_rejects_nonpositive(domain, frame):
    with pytest.raises(ValueError):
        place_slab(domain, frame, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 23), st.floats(0.5, 1e5))
def test_rotated_corners_keep_their_slab(k, V):
    Q = CUBIC_ROTATIONS[k]
    d = validate_corner(*(Q @ np.asarray(e) for e in DEFAULT_CORNER))
    f = frame_for_domain(d)
    assert mu(d) == pytest.approx(1 / math.sqrt(2))
    p = place_slab(d, f, V)
    assert p.nu * p.t ** 3 == pytest.approx(V, rel=1e-12)
    # habit plane through z is mapped to zero by the macroscopic gradient
    x = p.z + 3.0 * f.b2 - 2.0 * f.b3
    assert np.linalg.norm(f.gradients.DM @ (x - p.z)) < 1e-12


def test_unit_volume_round_trip(domain, frame):
    p = place_slab(domain, frame, 1.0)
    est, err = estimate_volume(domain, p.t, samples=200_000, seed=11)
    assert est == pytest.approx(1.0, abs=4 * err + 1e-3)


def test_cone_scaling_of_slab_volume(domain):
    n = find_habit_normal(domain)
    vals = [estimate_volume(domain, t, n, samples=50_000, seed=2)[0] / t ** 3 for t in (0.5, 2.0, 7.0)]
    assert max(vals) / min(vals) < 1.02
