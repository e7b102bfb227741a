import numpy as np
import pytest
from scipy.optimize import approx_fprime

from tomoproj.errors import InvalidSampleError, NonIdentifiableDesignError
from tomoproj.estimators import (MeanVarianceRelation, SampleBlock, _BlockLikelihood, _pair_maps,
                                 _projection_maps, estimate_1d, estimate_2d, estimate_mle,
                                 estimate_moment, plugin_optimal_projections)
from tomoproj.gaussian import GaussianModel, fisher_information, model_covariance, optimal_projections
from tomoproj.simulate import sample_gaussian_od


def _gauss_samples(A, theta, n, seed):
    S = model_covariance(A, GaussianModel(theta))
    return SampleBlock(np.random.default_rng(seed).multivariate_normal(np.zeros(len(S)), S, size=n))


def test_sample_block_invariants():
    with pytest.raises(InvalidSampleError):
        SampleBlock(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(InvalidSampleError):
        SampleBlock(np.ones((1, 3)))


def test_mle_identity_is_second_moment(rng):
    Y = SampleBlock(rng.normal(size=(500, 3)) * [1.0, 2.0, 0.5])
    r = estimate_mle(np.eye(3), Y, np.ones(3))
    assert r.converged
    np.testing.assert_allclose(r.theta_hat, Y.second_moment().diagonal(), rtol=1e-5)


def test_1d_axis_projections_is_second_moment(rng):
    Y = SampleBlock(rng.normal(size=(500, 3)) * [1.0, 2.0, 0.5])
    r = estimate_1d(np.eye(3), Y, np.eye(3), np.ones(3))
    np.testing.assert_allclose(r.theta_hat, Y.second_moment().diagonal(), rtol=1e-5)


def test_mle_two_leaf_within_three_se(two_leaf):
    th = np.ones(3)
    n = 100_000
    Y = _gauss_samples(two_leaf, th, n, seed=101)
    r = estimate_mle(two_leaf, Y, np.full(3, 0.5))
    se = np.sqrt(np.diag(np.linalg.inv(fisher_information(two_leaf, GaussianModel(th)))) / n)
    assert r.converged
    assert np.all(np.abs(r.theta_hat - th) < 3 * se)


def test_2d_equals_mle_when_single_pair(two_leaf):
    Y = _gauss_samples(two_leaf, [1.0, 2.0, 0.5], 3000, seed=7)
    a = estimate_mle(two_leaf, Y, np.ones(3))
    b = estimate_2d(two_leaf, Y, np.ones(3))
    np.testing.assert_allclose(a.theta_hat, b.theta_hat, rtol=1e-4)


def test_2d_descent_from_truth(router):
    th = np.random.default_rng(20070101).exponential(1.0, 16)
    Y = _gauss_samples(router, th, 2000, seed=8)
    eng = _BlockLikelihood(router, Y, _pair_maps(7))
    f0, _ = eng.value_and_grad(np.log(th))
    r = estimate_2d(router, Y, th)
    assert r.converged and r.objective_value <= f0 + 1e-12


def test_too_few_projections(router, rng):
    Y = _gauss_samples(router, np.ones(16), 100, seed=1)
    with pytest.raises(NonIdentifiableDesignError):
        estimate_1d(router, Y, rng.normal(size=(1, 7)), np.ones(16))
    with pytest.raises(NonIdentifiableDesignError):
        estimate_1d(np.eye(2), SampleBlock(rng.normal(size=(50, 2))), np.array([[1.0, 0.0]]), np.ones(2))


@pytest.mark.parametrize("relation", [None, MeanVarianceRelation(1.0, 2.0), MeanVarianceRelation(0.5, 1.3)])
@pytest.mark.parametrize("maps", ["joint", "pairs", "proj"])
def test_block_gradient(router, rng, relation, maps):
    means = rng.uniform(1, 10, 16)
    _, Y = sample_gaussian_od(router, means, MeanVarianceRelation(1, 2), 200, rng)
    L = {"joint": np.eye(7)[None], "pairs": _pair_maps(7),
         "proj": _projection_maps(rng.normal(size=(20, 7)))}[maps]
    eng = _BlockLikelihood(router, Y, L, relation)
    eta = np.log(means * rng.uniform(0.7, 1.3, 16))
    _, g = eng.value_and_grad(eta)
    fd = approx_fprime(eta, lambda e: eng.value_and_grad(e)[0], 1e-6)
    np.testing.assert_allclose(g, fd, rtol=2e-4, atol=1e-6 * np.max(np.abs(g)))


def test_moment_identity(rng):
    X = rng.normal(size=(400, 3)) * [1.0, 2.0, 3.0] + [5.0, 6.0, 7.0]
    r = estimate_moment(np.eye(3), X)
    np.testing.assert_allclose(r.mu_hat, X.mean(axis=0))
    np.testing.assert_allclose(r.theta_hat, X.var(axis=0))


def test_moment_two_leaf(two_leaf):
    th = np.array([1.0, 2.0, 3.0])
    r = estimate_moment(two_leaf, _gauss_samples(two_leaf, th, 100_000, seed=4))
    np.testing.assert_allclose(r.theta_hat, th, rtol=0.05)


def test_moment_with_relation_starts_likelihood(router):
    rel = MeanVarianceRelation(1.0, 2.0)
    means = np.exp(np.random.default_rng(0).uniform(0, np.log(100), 16))
    _, Y = sample_gaussian_od(router, means, rel, 1000, np.random.default_rng(2))
    m = estimate_moment(router, Y, rel)
    assert np.all(m.mu_hat > 0)
    np.testing.assert_allclose(m.theta_hat, rel.variance(m.mu_hat))
    fit = estimate_2d(router, Y, m.mu_hat, relation=rel)
    assert fit.converged
    assert np.median(np.abs(np.log(fit.mu_hat / means))) < np.median(np.abs(np.log(m.mu_hat / means))) + 0.05


def test_plugin_converges_to_optimal(two_leaf):
    th = np.array([1.0, 2.0, 0.5])
    Y = _gauss_samples(two_leaf, th, 100_000, seed=11)
    P = plugin_optimal_projections(two_leaf, Y)
    B = optimal_projections(two_leaf, model_covariance(two_leaf, GaussianModel(th))).directions
    cos = np.sum(P.directions * B, axis=1) / np.linalg.norm(P.directions, axis=1) / np.linalg.norm(B, axis=1)
    assert np.all(np.degrees(np.arccos(np.clip(cos, -1, 1))) < 1.0)
    assert not P.ridge_applied


def test_plugin_ridge_and_determinism(router, rng):
    Y = SampleBlock(rng.normal(size=(5, 7)))
    P = plugin_optimal_projections(router, Y)
    assert P.ridge_applied
    np.testing.assert_array_equal(P.directions, plugin_optimal_projections(router, Y).directions)
