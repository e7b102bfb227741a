"""Finite-sample estimators for Gaussian tomography.

All three likelihood estimators share one engine: a sum over "blocks"
``L_b Y`` of Gaussian negative log-likelihoods, where ``L_b`` is the
identity (full MLE), a single projection row (1D) or a coordinate pair
(2D). Optimization runs in log coordinates with L-BFGS-B and analytic
gradients.

Two parameterizations are supported:

* variance model (``relation=None``): ``Y ~ N(0, A diag(theta) A')``, the
  data are treated as zero-mean and the parameters are the variances;
* mean-variance model (``relation`` given): ``X_i ~ N(mu_i, phi mu_i**c)``,
  the parameters are the means ``mu`` and ``theta = phi mu**c``.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import InvalidSampleError, NonIdentifiableDesignError
from .gaussian import optimal_projections
from .identifiability import ProjectionSet, as_directions
from .topology import as_matrix

__all__ = [
    "SampleBlock",
    "EstimateReport",
    "EstimatorOptions",
    "MeanVarianceRelation",
    "estimate_mle",
    "estimate_1d",
    "estimate_2d",
    "estimate_moment",
    "plugin_optimal_projections",
]

log = logging.getLogger(__name__)

# search box for log-parameters, relative to the starting point
LOG_RANGE = 30.0


@dataclass(frozen=True)
class SampleBlock:
    """n x J block of i.i.d. observations of ``Y``."""

    data: np.ndarray
    seed_provenance: Optional[dict] = None

    def __post_init__(self):
        d = np.array(self.data, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.ndim != 2:
            raise InvalidSampleError("samples must be an n x J matrix")
        if d.shape[0] < 2:
            raise InvalidSampleError(f"need at least 2 samples, got {d.shape[0]}")
        if not np.all(np.isfinite(d)):
            raise InvalidSampleError("samples contain non-finite entries")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def J(self) -> int:
        return self.data.shape[1]

    def mean(self) -> np.ndarray:
        return self.data.mean(axis=0)

    def second_moment(self) -> np.ndarray:
        return self.data.T @ self.data / self.n

    def covariance(self) -> np.ndarray:
        """Sample covariance with divisor n."""
        c = self.data - self.mean()
        return c.T @ c / self.n


def as_samples(samples) -> SampleBlock:
    return samples if isinstance(samples, SampleBlock) else SampleBlock(samples)


@dataclass(frozen=True)
class MeanVarianceRelation:
    """``variance = phi * mean ** c``."""

    phi: float = 1.0
    c: float = 2.0

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError("phi must be positive")

    def variance(self, mu):
        return self.phi * np.asarray(mu, dtype=float) ** self.c

    def dvariance(self, mu):
        return self.phi * self.c * np.asarray(mu, dtype=float) ** (self.c - 1)


@dataclass
class EstimatorOptions:
    tolerance: float = 1e-7   # gradient sup-norm
    ftol: float = 1e-10       # relative objective change
    max_iters: int = 500


@dataclass
class EstimateReport:
    theta_hat: np.ndarray
    mu_hat: Optional[np.ndarray]
    objective_value: float
    iterations: int
    converged: bool
    estimator_tag: str
    message: str = ""
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta_hat"] = np.asarray(self.theta_hat).tolist()
        d["mu_hat"] = None if self.mu_hat is None else np.asarray(self.mu_hat).tolist()
        return d


# ---------------------------------------------------------------------------
# block likelihood engine


class _BlockLikelihood:
    """Sum of Gaussian negative log-likelihoods of ``L_b Y`` over blocks b."""

    def __init__(self, A, samples: SampleBlock, maps: np.ndarray, relation=None):
        self.A = as_matrix(A)
        if samples.J != self.A.shape[0]:
            raise ValueError(f"samples have {samples.J} columns but A has {self.A.shape[0]} rows")
        self.L = maps  # (B, d, J)
        self.G = maps @ self.A  # (B, d, I)
        self.relation = relation
        if relation is None:
            self.M0 = maps @ samples.second_moment() @ maps.transpose(0, 2, 1)
        else:
            self.M0 = maps @ samples.covariance() @ maps.transpose(0, 2, 1)
            self.ybar = samples.mean()

    def theta(self, params):
        return params if self.relation is None else self.relation.variance(params)

    def _pieces(self, params):
        theta = self.theta(params)
        S = np.einsum("bxi,i,byi->bxy", self.G, theta, self.G)
        Sinv = np.linalg.inv(S)
        if self.relation is None:
            M, r = self.M0, None
        else:
            r = self.L @ (self.ybar - self.A @ params)  # (B, d)
            M = self.M0 + r[:, :, None] * r[:, None, :]
        return S, Sinv, M, r

    def value_and_grad(self, eta):
        params = np.exp(eta)
        try:
            S, Sinv, M, r = self._pieces(params)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(eta)
        sign, logdet = np.linalg.slogdet(S)
        if np.any(sign <= 0):
            return np.inf, np.zeros_like(eta)
        f = 0.5 * (np.einsum("bxy,byx->", Sinv, M) + logdet.sum())
        H = Sinv @ self.G  # (B, d, I)
        g_theta = 0.5 * (np.einsum("bxi,bxi->i", self.G, H) - np.einsum("bxi,bxy,byi->i", H, M, H))
        if self.relation is None:
            g = g_theta * params
        else:
            g_mu = -np.einsum("bxi,bx->i", H, r)
            g = (g_theta * self.relation.dvariance(params) + g_mu) * params
        return float(f), g

    def curvature(self, params):
        """Expected Hessian (per observation) in the natural parameters."""
        theta = self.theta(params)
        S = np.einsum("bxi,i,byi->bxy", self.G, theta, self.G)
        H = np.linalg.solve(S, self.G)
        Q = np.einsum("kxa,kxb->kab", self.G, H)
        C = 0.5 * np.sum(Q ** 2, axis=0)
        if self.relation is None:
            return C
        d = self.relation.dvariance(params)
        return d[:, None] * C * d[None, :] + Q.sum(axis=0)


def _check_design(C: np.ndarray, tag: str) -> None:
    s = np.linalg.svd(C, compute_uv=False)
    if s[0] == 0 or s[-1] <= s[0] * 1e-10:
        raise NonIdentifiableDesignError(f"{tag}: design does not identify the parameters at the initial point")


def _fit(engine: _BlockLikelihood, init, options: Optional[EstimatorOptions], tag: str) -> EstimateReport:
    options = options or EstimatorOptions()
    init = np.asarray(init, dtype=float)
    if init.shape != (engine.A.shape[1],):
        raise ValueError(f"init must have length {engine.A.shape[1]}")
    if np.any(~np.isfinite(init)) or np.any(init <= 0):
        raise ValueError("init must be strictly positive")
    _check_design(engine.curvature(init), tag)
    x0 = np.log(init)
    res = optimize.minimize(
        engine.value_and_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(x0 - LOG_RANGE, x0 + LOG_RANGE)),
        options={"maxiter": options.max_iters, "gtol": options.tolerance,
                 "ftol": options.ftol, "maxcor": 20},
    )
    params = np.exp(res.x)
    converged = bool(res.success) and np.isfinite(res.fun)
    if not converged:
        log.debug("%s did not converge: %s", tag, res.message)
    if engine.relation is None:
        theta, mu = params, None
    else:
        theta, mu = engine.relation.variance(params), params
    return EstimateReport(theta, mu, float(res.fun), int(res.nit), converged, tag, str(res.message))


def _identity_maps(J: int) -> np.ndarray:
    return np.eye(J)[None]


def _projection_maps(projections) -> np.ndarray:
    B = as_directions(projections)
    return B[:, None, :]


def _pair_maps(J: int) -> np.ndarray:
    if J < 2:
        raise ValueError("pairwise estimator needs J >= 2")
    E = np.eye(J)
    return np.stack([E[[k, l]] for k, l in itertools.combinations(range(J), 2)])


def estimate_mle(A, samples, init, options: Optional[EstimatorOptions] = None,
                 relation: Optional[MeanVarianceRelation] = None) -> EstimateReport:
    """Maximum likelihood on the joint Gaussian law of ``Y``."""
    s = as_samples(samples)
    return _fit(_BlockLikelihood(A, s, _identity_maps(s.J), relation), init, options, "mle")


def estimate_1d(A, samples, projections, init, options: Optional[EstimatorOptions] = None,
                relation: Optional[MeanVarianceRelation] = None) -> EstimateReport:
    """Pseudo-likelihood from the marginal laws of ``beta_k' Y``.

    Raises NonIdentifiableDesignError when the projections cannot identify
    the parameters (e.g. fewer projections than components).
    """
    s = as_samples(samples)
    B = as_directions(projections)
    if B.shape[0] < as_matrix(A).shape[1] and relation is None:
        raise NonIdentifiableDesignError(
            f"{B.shape[0]} projections cannot identify {as_matrix(A).shape[1]} variances")
    return _fit(_BlockLikelihood(A, s, _projection_maps(B), relation), init, options, "one_d")


def estimate_2d(A, samples, init, options: Optional[EstimatorOptions] = None,
                relation: Optional[MeanVarianceRelation] = None) -> EstimateReport:
    """Pseudo-likelihood from all pairwise marginals ``(Y_k, Y_k')``."""
    s = as_samples(samples)
    return _fit(_BlockLikelihood(A, s, _pair_maps(s.J), relation), init, options, "two_d")


# ---------------------------------------------------------------------------
# moment estimator


def _covariance_design(A: np.ndarray):
    """Rows ``A_ji * A_j'i`` for each distinct (j <= j') entry of the covariance."""
    J = A.shape[0]
    iu = np.triu_indices(J)
    return A[iu[0]] * A[iu[1]], iu


def estimate_moment(A, samples, relation: Optional[MeanVarianceRelation] = None,
                    max_sweeps: int = 50) -> EstimateReport:
    """Least-squares fit of first and second sample moments.

    Without a relation the mean equations ``ybar = A mu`` and the covariance
    equations ``vech(S) = vech(A diag(theta) A')`` are solved separately by
    minimum-norm least squares. With a relation, ``theta = phi mu**c`` is
    substituted and the stacked system is solved for ``mu`` by Gauss-Newton
    (iterated linearization). Negative solutions are clipped to a small
    positive floor; the result is meant as a starting value.
    """
    s = as_samples(samples)
    M = as_matrix(A)
    D, iu = _covariance_design(M)
    vech = s.covariance()[iu]
    ybar = s.mean()
    notes = []

    def floor_clip(v):
        floor = 1e-6 * max(np.mean(np.abs(v)), 1e-300)
        if np.any(v <= 0):
            notes.append(f"clipped {int(np.sum(v <= 0))} nonpositive values to {floor:.3g}")
        return np.where(v > 0, v, floor)

    if relation is None:
        mu, *_ = np.linalg.lstsq(M, ybar, rcond=None)
        theta, _, rank, _ = np.linalg.lstsq(D, vech, rcond=None)
        if rank < M.shape[1]:
            notes.append(f"covariance equations rank deficient ({rank} < {M.shape[1]})")
        theta = floor_clip(theta)
        resid = np.sum((D @ theta - vech) ** 2) + np.sum((M @ mu - ybar) ** 2)
        return EstimateReport(theta, mu, float(resid), 1, True, "moment", warnings=notes)

    mu, *_ = np.linalg.lstsq(M, ybar, rcond=None)
    mu = floor_clip(mu)

    def residual(m):
        return np.concatenate([M @ m - ybar, D @ relation.variance(m) - vech])

    r = residual(mu)
    converged = False
    it = 0
    for it in range(1, max_sweeps + 1):
        Jac = np.vstack([M, D * relation.dvariance(mu)[None, :]])
        step, _, rank, _ = np.linalg.lstsq(Jac, -r, rcond=None)
        if rank < M.shape[1] and not any("rank" in n for n in notes):
            notes.append(f"linearized system rank deficient ({rank} < {M.shape[1]})")
        t = 1.0
        base = r @ r
        while True:
            cand = mu + t * step
            cand = np.where(cand > 0, cand, 0.5 * mu)  # stay in the positive orthant
            rc = residual(cand)
            if rc @ rc <= base or t < 1e-8:
                break
            t *= 0.5
        change = np.max(np.abs(cand - mu) / mu)
        mu, r = cand, rc
        if change < 1e-10:
            converged = True
            break
    mu = floor_clip(mu)
    return EstimateReport(relation.variance(mu), mu, float(r @ r), it, converged, "moment", warnings=notes)


# ---------------------------------------------------------------------------
# plug-in design


def plugin_optimal_projections(A, samples) -> ProjectionSet:
    """Maximum-correlation projections evaluated at the sample covariance.

    A singular sample covariance (e.g. n <= J) is regularized with a ridge of
    ``1e-8 * trace / J`` and the result is flagged via ``ridge_applied``.
    """
    s = as_samples(samples)
    S = s.covariance()
    J = S.shape[0]
    w = np.linalg.eigvalsh(S)
    ridge = s.n <= J or w[0] <= max(w[-1], 1e-300) * 1e-13
    if ridge:
        eps = 1e-8 * np.trace(S) / J
        if eps <= 0:
            eps = 1e-8
        S = S + eps * np.eye(J)
    with warnings.catch_warnings():
        if ridge:
            warnings.simplefilter("ignore", RuntimeWarning)
        P = optimal_projections(A, S)
    return ProjectionSet(P.directions, ridge_applied=bool(ridge))
