import numpy as np
import pytest

from tomoproj.identifiability import (ProjectionSet, check_identifiability, power_matrix,
                                      two_leaf_determinant, two_leaf_projections)


def test_power_matrix_two_leaf_a2(two_leaf):
    M = power_matrix(two_leaf_projections(2.0), two_leaf, 2)
    np.testing.assert_allclose(M, [[1, 1, 0], [1, 0, 1], [9, 1, 4]])


def test_power_matrix_orders(two_leaf, rng):
    B = rng.normal(size=(3, 2))
    M1 = power_matrix(B, two_leaf, 1)
    np.testing.assert_allclose(M1, B @ two_leaf.matrix)
    np.testing.assert_allclose(power_matrix(B, two_leaf, 3), M1 ** 3)


@pytest.mark.parametrize("a,n,expected", [(1, 2, 2), (-1, 3, 0), (0, 5, 0), (0, 2, 0)])
def test_determinant(a, n, expected):
    assert two_leaf_determinant(a, n) == pytest.approx(expected, abs=1e-12)


def test_determinant_matches_numeric(two_leaf):
    for a in (-2.0, -0.5, 0.5, 2.0):
        for n in range(2, 8):
            M = power_matrix(two_leaf_projections(a), two_leaf, n)
            assert np.linalg.det(M) == pytest.approx(two_leaf_determinant(a, n), rel=1e-9, abs=1e-9)


def test_two_leaf_cases(two_leaf):
    r = check_identifiability(two_leaf_projections(-1.0), two_leaf)
    assert r.identifiable_even and not r.identifiable_all and r.first_failing_order == 3
    r = check_identifiability(two_leaf_projections(0.0), two_leaf)
    assert not r.identifiable_even and not r.identifiable_all
    assert all(rank == 2 for _, rank in r.rank_by_order)
    r = check_identifiability(two_leaf_projections(1.0), two_leaf)
    assert r.identifiable_all and r.first_failing_order is None


def test_too_few_projections(router, rng):
    r = check_identifiability(rng.normal(size=(3, 7)), router)
    assert not r.identifiable_all and r.reason


def test_projection_set_rejects_degenerate():
    with pytest.raises(ValueError):
        ProjectionSet(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        ProjectionSet(np.array([[1.0, 2.0], [-2.0, -4.0]]))


def test_report_json(two_leaf):
    import json
    d = json.loads(check_identifiability(two_leaf_projections(1.0), two_leaf, max_order=5).to_json())
    assert d["max_order_checked"] == 5 and d["n_components"] == 3
