"""Analytics for the Gaussian tomography model ``Y ~ N(0, A diag(theta) A')``.

Fisher information, the maximum-correlation projection design, random
whitened projections, and the sandwich covariances of the 1D-projection
and pairwise (2D) pseudo-likelihood estimators.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import NonIdentifiableDesignError, SingularCovarianceError
from .identifiability import ProjectionSet, as_directions
from .topology import as_matrix

__all__ = [
    "GaussianModel",
    "AsymptoticCovariance",
    "model_covariance",
    "fisher_information",
    "optimal_projections",
    "random_projections",
    "sandwich_parts_1d",
    "asymptotic_cov_1d",
    "asymptotic_cov_2d",
    "asymptotic_cov_mle",
    "closed_form_cov_1d",
    "gaussian_score",
    "gaussian_logpdf",
    "spd_inverse",
    "inv_sqrtm",
]

COND_WARN = 1e10


@dataclass(frozen=True)
class GaussianModel:
    """Independent Gaussian components with variances ``theta`` and means ``mu``."""

    theta: np.ndarray
    mu: Optional[np.ndarray] = None

    def __post_init__(self):
        theta = np.atleast_1d(np.array(self.theta, dtype=float))
        if theta.ndim != 1 or np.any(~np.isfinite(theta)) or np.any(theta <= 0):
            raise ValueError("theta must be a vector of positive variances")
        mu = np.zeros_like(theta) if self.mu is None else np.atleast_1d(np.array(self.mu, dtype=float))
        if mu.shape != theta.shape:
            raise ValueError("mu and theta must have the same length")
        theta.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "mu", mu)

    @property
    def I(self) -> int:  # noqa: E743
        return self.theta.size

    def scaled(self, c: float) -> "GaussianModel":
        return GaussianModel(self.theta * c, self.mu)


@dataclass(frozen=True)
class AsymptoticCovariance:
    """Limit covariance of ``sqrt(n) (theta_hat - theta)``."""

    matrix: np.ndarray
    estimator_tag: str

    @property
    def std(self) -> np.ndarray:
        """Per-parameter limit standard deviations."""
        return np.sqrt(np.diag(self.matrix))

    def to_csv(self, path) -> None:
        np.savetxt(path, self.matrix, delimiter=",", fmt="%.17g")


def spd_inverse(S: np.ndarray, what: str = "covariance") -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky.

    Warns when the condition number exceeds 1e10 and raises
    SingularCovarianceError when the factorization fails.
    """
    S = np.asarray(S, dtype=float)
    try:
        c = sla.cho_factor(S, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularCovarianceError(f"{what} is singular or not positive definite") from exc
    cond = np.linalg.cond(S)
    if not np.isfinite(cond):
        raise SingularCovarianceError(f"{what} is singular")
    if cond > COND_WARN:
        warnings.warn(f"{what} is ill-conditioned (cond = {cond:.3g})", RuntimeWarning, stacklevel=2)
    inv = sla.cho_solve(c, np.eye(S.shape[0]))
    return 0.5 * (inv + inv.T)


def inv_sqrtm(S: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of an SPD matrix."""
    w, Q = np.linalg.eigh(np.asarray(S, dtype=float))
    if np.any(w <= 0) or w[0] <= w[-1] * 1e-15:
        raise SingularCovarianceError("covariance is singular or not positive definite")
    return (Q / np.sqrt(w)) @ Q.T


def model_covariance(A, model: GaussianModel) -> np.ndarray:
    """``Sigma = A diag(theta) A'``."""
    M = as_matrix(A)
    return (M * model.theta) @ M.T


def fisher_information(A, model: GaussianModel) -> np.ndarray:
    """``I_F(a, b) = U_ab**2 / 2`` with ``U = A' Sigma^-1 A``."""
    M = as_matrix(A)
    U = M.T @ spd_inverse(model_covariance(M, model)) @ M
    return 0.5 * U ** 2


def optimal_projections(A, sigma) -> ProjectionSet:
    """Maximum-correlation design: ``beta_k = Sigma^-1 A^k / lambda_k``.

    One projection per latent component (K = I), each scaled so that
    ``beta_k' Sigma beta_k = 1``.
    """
    M = as_matrix(A)
    P = spd_inverse(sigma) @ M  # column k is Sigma^-1 A^k
    lam = np.sqrt(np.einsum("jk,jk->k", M, P))
    return ProjectionSet((P / lam).T)


def random_projections(sigma, K: int, rng: np.random.Generator) -> ProjectionSet:
    """Rows ``alpha_k' Sigma^{-1/2}`` with ``alpha_k ~ N(0, I_J)``."""
    R = inv_sqrtm(sigma)
    alpha = rng.standard_normal((K, R.shape[0]))
    return ProjectionSet(alpha @ R)


def sandwich_parts_1d(A, model: GaussianModel, projections):
    """Return ``(V, W)`` of the 1D sandwich: ``C = V'V/2``, ``I = V'WV/2``."""
    M = as_matrix(A)
    B = as_directions(projections)
    sigma = model_covariance(M, model)
    BSB = B @ sigma @ B.T
    s2 = np.diag(BSB)
    gamma = B @ M
    V = gamma ** 2 / s2[:, None]
    W = BSB ** 2 / np.outer(s2, s2)
    return V, W


def _check_design(C: np.ndarray, what: str) -> None:
    s = np.linalg.svd(C, compute_uv=False)
    if s[0] == 0 or s[-1] <= s[0] * 1e-12:
        raise NonIdentifiableDesignError(f"{what}: curvature matrix is singular, parameters not identified")


def asymptotic_cov_1d(A, model: GaussianModel, projections) -> AsymptoticCovariance:
    """Sandwich covariance ``C^-1 I C^-1`` of the 1D-projection estimator."""
    V, W = sandwich_parts_1d(A, model, projections)
    C = 0.5 * V.T @ V
    Ivar = 0.5 * V.T @ W @ V
    _check_design(C, "1D projections")
    Cinv = np.linalg.inv(C)
    cov = Cinv @ Ivar @ Cinv
    return AsymptoticCovariance(0.5 * (cov + cov.T), "one_d")


def closed_form_cov_1d(A, model: GaussianModel, projections) -> np.ndarray:
    """``2 V^-1 W V^-T``, valid when K = I and V is invertible."""
    V, W = sandwich_parts_1d(A, model, projections)
    if V.shape[0] != V.shape[1]:
        raise ValueError("closed form needs K = I")
    Vinv = np.linalg.inv(V)
    return 2.0 * Vinv @ W @ Vinv.T


def _pair_blocks(M: np.ndarray, sigma: np.ndarray):
    J = M.shape[0]
    pairs = list(itertools.combinations(range(J), 2))
    idx = np.array(pairs)
    G = M[idx]  # (P, 2, I)
    S = sigma[idx[:, :, None], idx[:, None, :]]  # (P, 2, 2)
    det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
    if np.any(np.abs(det) <= 1e-14 * np.abs(S[:, 0, 0] * S[:, 1, 1])):
        bad = [pairs[p] for p in np.flatnonzero(np.abs(det) <= 1e-14 * np.abs(S[:, 0, 0] * S[:, 1, 1]))]
        raise SingularCovarianceError(f"singular 2x2 covariance for pairs {bad}")
    return idx, G, S


def asymptotic_cov_2d(A, model: GaussianModel) -> AsymptoticCovariance:
    """Sandwich covariance of the all-pairs 2D pseudo-likelihood estimator."""
    M = as_matrix(A)
    if M.shape[0] < 2:
        raise ValueError("pairwise estimator needs J >= 2")
    sigma = model_covariance(M, model)
    idx, G, S = _pair_blocks(M, sigma)
    H = np.linalg.solve(S, G)  # S_pp^-1 [A_k; A_k'], (P, 2, I)
    Q = np.einsum("pxa,pxb->pab", G, H)
    C = 0.5 * np.sum(Q ** 2, axis=0)
    cross = sigma[idx[:, None, :, None], idx[None, :, None, :]]  # (P, P, 2, 2)
    T = np.einsum("pxa,pqxy,qyb->pqab", H, cross, H)
    Ivar = 0.5 * np.sum(T ** 2, axis=(0, 1))
    _check_design(C, "2D projections")
    Cinv = np.linalg.inv(C)
    cov = Cinv @ Ivar @ Cinv
    return AsymptoticCovariance(0.5 * (cov + cov.T), "two_d")


def asymptotic_cov_mle(A, model: GaussianModel) -> AsymptoticCovariance:
    F = fisher_information(A, model)
    _check_design(F, "full likelihood")
    cov = np.linalg.inv(F)
    return AsymptoticCovariance(0.5 * (cov + cov.T), "mle")


def gaussian_score(A, model: GaussianModel, y) -> np.ndarray:
    """Score ``s_i(y) = -d/dtheta_i log p(y; theta)``.

    Accepts a single J-vector or an n x J block (returns n x I).
    """
    M = as_matrix(A)
    Sinv = spd_inverse(model_covariance(M, model))
    y = np.asarray(y, dtype=float)
    z = (y - M @ model.mu) @ Sinv @ M  # y' Sigma^-1 A^i
    trace = np.einsum("ji,jk,ki->i", M, Sinv, M)
    return 0.5 * (trace - z ** 2)


def gaussian_logpdf(A, model: GaussianModel, y) -> np.ndarray:
    M = as_matrix(A)
    sigma = model_covariance(M, model)
    Sinv = spd_inverse(sigma)
    r = np.asarray(y, dtype=float) - M @ model.mu
    _, logdet = np.linalg.slogdet(sigma)
    quad = np.einsum("...j,jk,...k->...", r, Sinv, r)
    return -0.5 * quad - 0.5 * (M.shape[0] * np.log(2 * np.pi) + logdet)
