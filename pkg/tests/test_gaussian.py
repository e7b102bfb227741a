import numpy as np
import pytest

from tomoproj.errors import NonIdentifiableDesignError
from tomoproj.gaussian import (GaussianModel, asymptotic_cov_1d, asymptotic_cov_2d, closed_form_cov_1d,
                               fisher_information, gaussian_logpdf, gaussian_score, inv_sqrtm,
                               model_covariance, optimal_projections, random_projections)


def _theta(rng, I):
    return rng.exponential(1.0, I) + 0.05


def test_model_covariance_cases(two_leaf, four_leaf):
    np.testing.assert_allclose(model_covariance(np.eye(3), GaussianModel([1, 2, 3])), np.diag([1, 2, 3]))
    np.testing.assert_allclose(model_covariance(two_leaf, GaussianModel([1, 1, 1])), [[2, 1], [1, 2]])
    S = model_covariance(four_leaf, GaussianModel(np.ones(7)))
    A = four_leaf.matrix
    np.testing.assert_allclose(S, A @ A.T)  # shared-path counts
    np.testing.assert_allclose(np.diag(S), 3)


def test_fisher_identity():
    th = np.array([0.5, 2.0, 3.0])
    np.testing.assert_allclose(fisher_information(np.eye(3), GaussianModel(th)), np.diag(0.5 / th ** 2))


def test_fisher_two_leaf_by_hand(two_leaf):
    Sinv = np.array([[2, -1], [-1, 2]]) / 3.0
    A = two_leaf.matrix
    U = A.T @ Sinv @ A
    np.testing.assert_allclose(fisher_information(two_leaf, GaussianModel([1, 1, 1])), 0.5 * U ** 2)


def test_fisher_scaling(router, rng):
    m = GaussianModel(_theta(rng, 16))
    np.testing.assert_allclose(fisher_information(router, m.scaled(3.0)),
                               fisher_information(router, m) / 9.0, rtol=1e-10)


def test_optimal_identity_case():
    th = np.array([1.0, 4.0, 9.0])
    B = optimal_projections(np.eye(3), np.diag(th)).directions
    np.testing.assert_allclose(B, np.diag(th ** -0.5), atol=1e-14)


def test_optimal_normalized_and_maximal(two_leaf, router, rng):
    m = GaussianModel([1, 1, 1])
    S = model_covariance(two_leaf, m)
    B = optimal_projections(two_leaf, S).directions
    assert B.shape == (3, 2)
    np.testing.assert_allclose(np.einsum("kj,jl,kl->k", B, S, B), 1.0, atol=1e-12)

    th = _theta(rng, 16)
    S = model_covariance(router, GaussianModel(th))
    B = optimal_projections(router, S).directions
    A = router.matrix

    def corr(b, k):
        return b @ A[:, k] * np.sqrt(th[k]) / np.sqrt(b @ S @ b)

    for k in range(16):
        best = corr(B[k], k)
        for _ in range(20):
            assert corr(B[k] + 0.05 * rng.normal(size=7), k) <= best + 1e-12


def test_random_projections(router, rng):
    S = model_covariance(router, GaussianModel(_theta(rng, 16)))
    P1 = random_projections(S, 32, np.random.default_rng(5))
    P2 = random_projections(S, 32, np.random.default_rng(5))
    np.testing.assert_array_equal(P1.directions, P2.directions)
    alpha = P1.directions @ np.linalg.inv(inv_sqrtm(S))
    var = np.einsum("kj,jl,kl->k", P1.directions, S, P1.directions)
    np.testing.assert_allclose(var / np.sum(alpha ** 2, axis=1), 1.0, rtol=1e-10)
    Z = random_projections(np.eye(3), 4, np.random.default_rng(9)).directions
    np.testing.assert_allclose(Z, np.random.default_rng(9).standard_normal((4, 3)))


@pytest.mark.parametrize("which", ["router", "four_leaf"])
def test_optimal_is_efficient(which, request, rng):
    A = request.getfixturevalue(which)
    m = GaussianModel(_theta(rng, A.I))
    C = asymptotic_cov_1d(A, m, optimal_projections(A, model_covariance(A, m))).matrix
    Finv = np.linalg.inv(fisher_information(A, m))
    assert np.linalg.norm(C - Finv) / np.linalg.norm(Finv) < 1e-8


def test_sandwich_square_case(router, rng):
    m = GaussianModel(_theta(rng, 16))
    P = random_projections(model_covariance(router, m), 16, rng)
    np.testing.assert_allclose(asymptotic_cov_1d(router, m, P).matrix,
                               closed_form_cov_1d(router, m, P), rtol=1e-7)


def test_duplicate_projections_rejected(two_leaf):
    B = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NonIdentifiableDesignError):
        asymptotic_cov_1d(two_leaf, GaussianModel([1, 1, 1]), B)


def test_2d_single_pair_is_mle(two_leaf):
    m = GaussianModel([1.0, 2.0, 0.5])
    np.testing.assert_allclose(asymptotic_cov_2d(two_leaf, m).matrix,
                               np.linalg.inv(fisher_information(two_leaf, m)), rtol=1e-10)


def test_2d_not_efficient_and_homogeneous(router):
    th = np.random.default_rng(20070101).exponential(1.0, 16)
    m = GaussianModel(th)
    C2 = asymptotic_cov_2d(router, m)
    C1 = asymptotic_cov_1d(router, m, optimal_projections(router, model_covariance(router, m)))
    assert np.any(np.diag(C2.matrix) > np.diag(C1.matrix) * (1 + 1e-6))
    np.testing.assert_allclose(asymptotic_cov_2d(router, m.scaled(2.5)).matrix, 6.25 * C2.matrix, rtol=1e-9)


def test_score_trivial():
    np.testing.assert_allclose(gaussian_score(np.eye(4), GaussianModel(np.ones(4)), np.zeros(4)), 0.5)


def test_score_finite_differences(rng):
    for _ in range(20):
        J, I = 3, 5
        A = (rng.random((J, I)) < 0.5).astype(float)
        A[:, :J] = np.eye(J)  # guarantees full row rank
        th = _theta(rng, I)
        y = rng.normal(size=J) * 2
        s = gaussian_score(A, GaussianModel(th), y)
        fd = np.empty(I)
        for i in range(I):
            h = 1e-6 * th[i]
            e = np.zeros(I)
            e[i] = h
            fd[i] = -(gaussian_logpdf(A, GaussianModel(th + e), y)
                      - gaussian_logpdf(A, GaussianModel(th - e), y)) / (2 * h)
        assert np.max(np.abs(s - fd) / np.maximum(np.abs(fd), 1e-3)) < 1e-5


def test_score_mean_zero(two_leaf):
    m = GaussianModel([1.0, 2.0, 0.5])
    S = model_covariance(two_leaf, m)
    Y = np.random.default_rng(3).multivariate_normal(np.zeros(2), S, size=100_000)
    s = np.array([gaussian_score(two_leaf, m, y) for y in Y[:100_000]])
    se = s.std(axis=0) / np.sqrt(len(s))
    assert np.all(np.abs(s.mean(axis=0)) < 3 * se)
