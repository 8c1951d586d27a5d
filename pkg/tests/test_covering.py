import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corner_nucleation.corner_geometry import mu
from corner_nucleation.covering import (
    Ball,
    CoveringConfig,
    VoxelSet,
    certify,
    covers_centers,
    density_points,
    dilation_fraction,
    find_band_time,
    read_vox,
    vitali_select,
    voxelize_ball,
    write_vox,
)


@pytest.fixture(scope="module")
def corner_ball(domain):
    d = domain.a + domain.b + domain.c
    centre = domain.origin + d * (30.0 / mu(domain))
    return centre, voxelize_ball(domain, centre, 20.0, n=64)


def test_vox_round_trip(tmp_path, rng):
    bits = (rng.random((5, 7, 3)) < 0.4).astype(np.uint8)
    vs = VoxelSet(bits, [0.1, -2.0, 3.5], 0.25)
    p = tmp_path / "a.vox"
    write_vox(p, vs)
    raw = p.read_bytes()
    assert raw.startswith(b"VOX3 5 7 3 0.1 -2.0 3.5 0.25\n")
    # x-fastest ordering
    body = raw[raw.index(b"\n") + 1:]
    assert body[1] == bits[1, 0, 0] and body[5] == bits[0, 1, 0]
    back = read_vox(p)
    assert back.dims == vs.dims and back.spacing == vs.spacing
    np.testing.assert_array_equal(back.bits, bits)
    np.testing.assert_array_equal(back.origin, vs.origin)


def test_vox_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.vox"
    p.write_bytes(b"VOX3 2 2 2 0 0 0 1\n\x00\x01")
    with pytest.raises(ValueError):
        read_vox(p)
    p.write_bytes(b"NOPE\n")
    with pytest.raises(ValueError):
        read_vox(p)


def test_volume_is_count_times_spacing_cubed():
    vs = VoxelSet(np.ones((2, 3, 4)), np.zeros(3), 0.5)
    assert vs.volume == 24 * 0.125


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 9), min_size=3, max_size=3), st.floats(0.1, 6), st.integers(0, 2 ** 16))
def test_ball_counts_brute_force(centre, radius, seed):
    rng = np.random.default_rng(seed)
    bits = (rng.random((8, 9, 7)) < 0.5).astype(np.uint8)
    vs = VoxelSet(bits, np.zeros(3), 1.0)
    occ, tot = vs.ball_counts(np.asarray(centre), radius)
    # brute force over a lattice large enough to contain the ball
    g = np.arange(-12, 22)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    pts = np.stack([X, Y, Z], -1).reshape(-1, 3) + 0.5
    inb = np.sum((pts - centre) ** 2, axis=1) <= radius ** 2
    idx = (pts - 0.5).astype(int)
    inside_arr = np.all((idx >= 0) & (idx < np.array(bits.shape)), axis=1)
    occ_bf = int(np.sum(bits[tuple(idx[inb & inside_arr].T)]))
    assert tot == int(inb.sum())
    assert occ == occ_bf


def test_density_points_examples(corner_ball):
    centre, vs = corner_ball
    pts = density_points(vs, window=2)
    assert np.min(np.linalg.norm(pts - centre, axis=1)) < vs.spacing
    single = VoxelSet(np.pad(np.ones((1, 1, 1)), 3), np.zeros(3), 1.0)
    assert len(density_points(single, 2, 0.99)) == 0
    with pytest.raises(ValueError):
        density_points(VoxelSet(np.zeros((3, 3, 3)), np.zeros(3), 1.0))


def test_density_points_of_half_space_slab(domain):
    bits = np.zeros((20, 20, 20), np.uint8)
    bits[:, :, :10] = 1
    vs = VoxelSet(bits, np.zeros(3), 1.0)
    pts = density_points(vs, 2, 0.99)
    assert pts[:, 2].max() <= 10 - 2 + 0.5
    # the window is 2 voxels, so the array faces also keep points away
    assert pts[:, 0].min() >= 2


def test_dilation_fraction_half_space(domain):
    """M = half-space {x·d <= x̄·d}: the shrunk ball is cut roughly in half at t = 0."""
    d = domain.a + domain.b + domain.c
    dn = d / np.linalg.norm(d)
    x0 = domain.origin + d * 40
    h = 0.25
    n = 160
    lo = x0 - n * h / 2
    idx = np.stack(np.meshgrid(*[np.arange(n)] * 3, indexing="ij"), -1)
    ctr = lo + (idx + 0.5) * h
    bits = ((ctr - x0) @ dn <= 0).astype(np.uint8)
    vs = VoxelSet(bits, lo, h)
    f = dilation_fraction(vs, x0, 8.0, 0.0, 0.5, domain)
    assert f == pytest.approx(0.5, abs=0.03)
    hit = find_band_time(vs, x0, 8.0, 0.5, domain)
    assert hit.t == 0.0


def test_dilation_fraction_refuses_escape(domain, corner_ball):
    _, vs = corner_ball
    with pytest.raises(ValueError):
        dilation_fraction(vs, domain.origin + 0.01 * domain.a, 5.0, 0.0, 0.25, domain)


def test_band_time_walks_out_of_ball(domain, corner_ball):
    centre, vs = corner_ball
    pts = density_points(vs)
    x0 = pts[np.argmin(np.linalg.norm(pts - centre, axis=1))]
    hit = find_band_time(vs, x0, 2 * vs.spacing, 0.25, domain)
    assert hit.t > 0
    assert 0.1 - 0.05 <= hit.fraction <= 0.9 + 0.05
    # the walk stops before the shrunk ball has left the blob
    assert hit.fraction > 0


def test_band_time_bounded_set_goes_to_zero(domain, corner_ball):
    centre, vs = corner_ball
    assert dilation_fraction(vs, centre, 1.0, 200.0, 0.25, domain) == 0.0


def test_vitali_examples():
    b = Ball((0.0, 0.0, 0.0), 1.0)
    assert vitali_select([b]) == [b]
    b1, b2 = Ball((1.0, 0.0, 0.0), 1.0), Ball((0.0, 0.0, 0.0), 1.0)
    assert vitali_select([b1, b2]) == [b2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_vitali_random_family(seed):
    rng = np.random.default_rng(seed)
    balls = [Ball(tuple(rng.uniform(0, 10, 3)), float(rng.uniform(0.1, 2))) for _ in range(100)]
    kept = vitali_select(balls)
    for i, a in enumerate(kept):
        for b in kept[i + 1:]:
            assert np.linalg.norm(np.subtract(a.center, b.center)) >= a.radius + b.radius
    assert covers_centers(kept, balls, 5.0)
    # 3x is enough for centres in this greedy order
    assert covers_centers(kept, balls, 3.0)


def test_certify_ball(domain, corner_ball):
    _, vs = corner_ball
    rep = certify(vs, domain, CoveringConfig(max_seeds=300))
    assert rep.ok
    assert rep.c > 0 and rep.sum_r3 >= rep.c * rep.volume * (1 - 1e-12)
    assert rep.proxy_sum_r73 >= rep.sum_r3 ** (7 / 9) * (1 - 1e-12)


def test_certify_empty(domain):
    with pytest.raises(ValueError):
        certify(VoxelSet(np.zeros((4, 4, 4)), np.ones(3), 1.0), domain)


def test_certify_kappa_checked(domain, corner_ball):
    with pytest.raises(ValueError):
        certify(corner_ball[1], domain, CoveringConfig(kappa=1.5))


def test_fallback_threshold_warns(domain):
    d = domain.a + domain.b + domain.c
    c = domain.origin + d * 20
    bits = np.zeros((9, 9, 9), np.uint8)
    bits[4, 4, 4] = 1
    vs = VoxelSet(bits, c - 4.5 * 0.5, 0.5)
    with pytest.warns(UserWarning):
        rep = certify(vs, domain, CoveringConfig(window=1))
    assert rep.density_threshold == 0.1


def test_resolution_does_not_lose_coverage(domain):
    d = domain.a + domain.b + domain.c
    centre = domain.origin + d * (30.0 / mu(domain))
    fr = []
    for n in (32, 64):
        vs = voxelize_ball(domain, centre, 20.0, n=n)
        rep = certify(vs, domain, CoveringConfig(max_seeds=200))
        fr.append((rep.covered_fraction, min(3 * vs.spacing / (rep.kappa * b.radius) for b in rep.balls)))
    assert fr[1][0] >= fr[0][0] - fr[1][1]


def test_proxy_inequality_is_subadditivity():
    r = np.array([1.0, 2.0, 3.5])
    assert np.sum(r ** (7 / 3)) >= np.sum(r ** 3) ** (7 / 9)
    assert math.isclose(np.sum(r[:1] ** (7 / 3)), np.sum(r[:1] ** 3) ** (7 / 9))
