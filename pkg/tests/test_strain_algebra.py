import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corner_nucleation.strain_algebra import (
    TWIN_TABLE_ORDER,
    algebra_report,
    compatibility_check,
    construction_gradients,
    habit_relation_residual,
    permutation_sign,
    recovered_normals_match,
    sym,
    sym_tensor_product,
    twin_normal,
    twin_systems,
    variant_strain,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vectors = st.lists(finite, min_size=3, max_size=3).map(np.array)


def test_variant_strains_are_traceless_diagonals():
    for i in (1, 2, 3):
        e = variant_strain(i)
        assert np.trace(e) == 0
        assert e[i - 1, i - 1] == -2
    assert not variant_strain(0).any()


def test_variant_index_checked():
    with pytest.raises(ValueError):
        variant_strain(4)
    with pytest.raises(ValueError):
        twin_normal(1, 1)


def test_twin_normals_unit_and_table_order():
    assert len(TWIN_TABLE_ORDER) == 6
    for i, j in TWIN_TABLE_ORDER:
        assert np.linalg.norm(twin_normal(i, j)) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(twin_normal(3, 2), np.array([0, -1, 1]) / np.sqrt(2))


def test_permutation_signs():
    assert permutation_sign(1, 2, 3) == 1
    assert permutation_sign(2, 1, 3) == -1
    assert permutation_sign(3, 1, 2) == 1
    with pytest.raises(ValueError):
        permutation_sign(1, 1, 2)


def test_twin_and_habit_relations_exact():
    for ts in twin_systems():
        assert ts.residual() < 1e-12
    for i, j in TWIN_TABLE_ORDER:
        assert habit_relation_residual(i, j) < 1e-12


def test_construction_gradients_hand_values():
    g = construction_gradients()
    np.testing.assert_array_equal(sym(g.D1), variant_strain(1))
    np.testing.assert_array_equal(sym(g.D2), variant_strain(2))
    b12, b21 = twin_normal(1, 2), twin_normal(2, 1)
    np.testing.assert_allclose(g.D1 - g.DM, 4 * np.outer(b12, b21), atol=1e-15)
    np.testing.assert_allclose(g.D2 - g.DM, -2 * np.outer(b12, b21), atol=1e-15)
    assert max(g.residuals().values()) < 1e-12


def test_report_keys():
    rep = algebra_report()
    assert len(rep) == 6 + 6 + 5
    assert max(rep.values()) < 1e-12


@pytest.mark.parametrize("i,j", [(1, 2), (1, 3), (2, 3)])
def test_variant_pairs_compatible_with_table_normals(i, j):
    res = compatibility_check(variant_strain(i), variant_strain(j))
    assert res.compatible
    assert res.residual < 1e-12
    assert recovered_normals_match(res, i, j)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_austenite_variant_pairs_incompatible(i):
    res = compatibility_check(variant_strain(0), variant_strain(i))
    assert not res.compatible
    assert abs(res.eigenvalues[1]) == pytest.approx(1.0)


def test_compatibility_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        compatibility_check(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]]), np.zeros((3, 3)))


def test_first_nonzero_component_of_b_positive():
    res = compatibility_check(variant_strain(2), variant_strain(1))
    nz = np.flatnonzero(np.abs(res.b) > 1e-12)
    assert res.b[nz[0]] > 0


@settings(max_examples=200, deadline=None)
@given(vectors, vectors)
def test_symmetric_rank_one_products_are_recovered(a, b):
    S = sym_tensor_product(a, b)
    res = compatibility_check(S, np.zeros((3, 3)))
    assert res.compatible
    assert res.residual <= 1e-7 * max(np.linalg.norm(S), 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=3, max_size=3))
def test_definite_differences_are_incompatible(diag):
    res = compatibility_check(np.diag(diag), np.zeros((3, 3)))
    assert not res.compatible
