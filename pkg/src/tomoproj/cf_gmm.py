"""Characteristic-function GMM for mixture-modeled link delays.

Each link delay is modeled as a mixture of an atom at zero, uniform pieces
on fixed bins ``[e_{j-1}, e_j]`` (``e_0 = 0``) and an exponential tail
beyond the last edge. With the bins and tail rate fixed, the CF of any
projection is linear in one link's weights when the other links are held
fixed, so the weighted L2 distance between empirical and model CFs is a
quadratic in those weights. The fit cycles over links and solves one
simplex-constrained QP per link.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np

from .estimators import as_samples
from .identifiability import as_directions
from .topology import as_matrix

__all__ = [
    "MixtureLinkModel",
    "BinSpec",
    "CFWeightSpec",
    "CFFitOptions",
    "CFFitResult",
    "bins_from_quantiles",
    "component_cfs",
    "mixture_cf",
    "projection_cf",
    "mm1_cf",
    "empirical_cf",
    "cf_nodes",
    "cf_objective",
    "fit_cf_gmm",
    "simplex_qp",
    "mixture_cdf",
    "mixture_quantile",
    "models_to_json",
    "models_from_json",
]

log = logging.getLogger(__name__)

PAIRWISE = "pairwise"


@dataclass(frozen=True)
class BinSpec:
    """Fixed bin edges ``e_1 < ... < e_m`` and tail rate for one link."""

    edges: np.ndarray
    tail_rate: float

    def __post_init__(self):
        e = np.atleast_1d(np.array(self.edges, dtype=float))
        if e.ndim != 1 or e.size < 1:
            raise ValueError("need at least one bin edge")
        if np.any(e <= 0) or np.any(np.diff(e) <= 0):
            raise ValueError("bin edges must be positive and strictly increasing")
        if not self.tail_rate > 0:
            raise ValueError("tail_rate must be positive")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def n_weights(self) -> int:
        return self.edges.size + 2


def bins_from_quantiles(quantile, n_bins: int) -> BinSpec:
    """Bins at levels ``j / (n_bins + 1)`` of the positive part's quantile function.

    The top ``1 / (n_bins + 1)`` of the positive mass is left to the tail.
    Its rate is read off the last two edges assuming an exponential upper
    tail: ``log((1 - p_{m-1}) / (1 - p_m)) / (e_m - e_{m-1})``.
    """
    if n_bins < 2:
        raise ValueError("need at least two bins to place the tail")
    levels = np.arange(1, n_bins + 1) / (n_bins + 1)
    edges = np.asarray([quantile(p) for p in levels], dtype=float)
    rate = np.log((1 - levels[-2]) / (1 - levels[-1])) / (edges[-1] - edges[-2])
    return BinSpec(edges, float(rate))


@dataclass(frozen=True)
class MixtureLinkModel:
    """Atom at zero + uniform bins + exponential tail starting at the last edge."""

    atom_at_zero: float
    bin_edges: np.ndarray
    bin_weights: np.ndarray
    tail_weight: float
    tail_rate: float

    def __post_init__(self):
        spec = BinSpec(self.bin_edges, self.tail_rate)
        w = np.atleast_1d(np.array(self.bin_weights, dtype=float))
        if w.shape != spec.edges.shape:
            raise ValueError("one weight per bin required")
        allw = np.concatenate([[self.atom_at_zero], w, [self.tail_weight]])
        if np.any(allw < 0):
            raise ValueError("mixture weights must be nonnegative")
        if abs(allw.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {allw.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "bin_edges", spec.edges)
        object.__setattr__(self, "bin_weights", w)
        object.__setattr__(self, "atom_at_zero", float(self.atom_at_zero))
        object.__setattr__(self, "tail_weight", float(self.tail_weight))
        object.__setattr__(self, "tail_rate", float(self.tail_rate))

    @classmethod
    def from_weights(cls, spec: BinSpec, weights) -> "MixtureLinkModel":
        w = np.asarray(weights, dtype=float)
        if w.shape != (spec.n_weights,):
            raise ValueError(f"expected {spec.n_weights} weights")
        return cls(w[0], spec.edges, w[1:-1], w[-1], spec.tail_rate)

    @property
    def spec(self) -> BinSpec:
        return BinSpec(self.bin_edges, self.tail_rate)

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([[self.atom_at_zero], self.bin_weights, [self.tail_weight]])

    def to_dict(self) -> dict:
        return {
            "atom_at_zero": self.atom_at_zero,
            "bin_edges": self.bin_edges.tolist(),
            "bin_weights": self.bin_weights.tolist(),
            "tail_weight": self.tail_weight,
            "tail_rate": self.tail_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureLinkModel":
        return cls(d["atom_at_zero"], d["bin_edges"], d["bin_weights"], d["tail_weight"], d["tail_rate"])


def models_to_json(models: Sequence[MixtureLinkModel]) -> str:
    return json.dumps([m.to_dict() for m in models], indent=2)


def models_from_json(text: str) -> list:
    return [MixtureLinkModel.from_dict(d) for d in json.loads(text)]


@dataclass(frozen=True)
class CFWeightSpec:
    """Gaussian weight measure on frequencies, per normalized projection axis."""

    kind: str = "gaussian"
    std: float = 5.0
    n_nodes: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported weight kind {self.kind!r}")
        if not self.std > 0:
            raise ValueError("std must be positive")
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")


# ---------------------------------------------------------------------------
# characteristic functions


def _uniform_unit_cf(x):
    # (e^{ix} - 1) / (ix) written without the removable singularity at 0
    h = np.sinc(x / (2 * np.pi))
    return np.sinc(x / np.pi) + 1j * 0.5 * x * h * h


def component_cfs(spec, t) -> np.ndarray:
    """CFs of the mixture components at ``t``: columns atom, bins..., tail."""
    if isinstance(spec, MixtureLinkModel):
        spec = spec.spec
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e = spec.edges
    lo = np.concatenate([[0.0], e[:-1]])
    width = e - lo
    out = np.empty(t.shape + (spec.n_weights,), dtype=complex)
    out[..., 0] = 1.0
    out[..., 1:-1] = np.exp(1j * t[..., None] * lo) * _uniform_unit_cf(t[..., None] * width)
    out[..., -1] = np.exp(1j * t * e[-1]) / (1 - 1j * t / spec.tail_rate)
    return out


def mixture_cf(model: MixtureLinkModel, t):
    """CF of a mixture link model; scalar in, scalar out."""
    val = component_cfs(model, t) @ model.weights
    return val[0] if np.ndim(t) == 0 else val


def mm1_cf(u: float, v: float, t):
    """CF of the M/M/1 waiting time: atom ``1 - u`` at 0, exponential mean ``v``."""
    t_arr = np.asarray(t, dtype=float)
    return (1.0 - u) + u / (1.0 - 1j * v * t_arr)


def projection_cf(A, models: Sequence, beta, t):
    """CF of ``beta' Y`` with ``Y = A X``: product of link CFs at ``(beta' A^i) t``.

    ``models`` holds one MixtureLinkModel per link, or any callable mapping
    a frequency array to that link's CF (e.g. ``partial(mm1_cf, u, v)``).
    """
    M = as_matrix(A)
    if len(models) != M.shape[1]:
        raise ValueError("need one model per latent component")
    scales = np.asarray(beta, dtype=float) @ M
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    val = np.ones(t_arr.shape, dtype=complex)
    for s, m in zip(scales, models):
        if s != 0:
            cf = m if callable(m) else partial(mixture_cf, m)
            val = val * cf(s * t_arr)
    return val[0] if np.ndim(t) == 0 else val


def empirical_cf(z, t, chunk: int = 1 << 22):
    """``mean_j exp(i t z_j)`` for scalar or array ``t``."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size < 1:
        raise ValueError("need at least one sample")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
    out = np.empty(t_arr.size, dtype=complex)
    step = max(1, chunk // z.size)
    for a in range(0, t_arr.size, step):
        ph = np.outer(t_arr[a:a + step], z)
        out[a:a + step] = np.cos(ph).mean(axis=1) + 1j * np.sin(ph).mean(axis=1)
    return out[0] if np.ndim(t) == 0 else out.reshape(np.shape(t))


def _ecf_vectors(omega: np.ndarray, Y: np.ndarray, chunk: int = 1 << 22) -> np.ndarray:
    """Empirical CF of ``Y`` at frequency vectors (rows of omega)."""
    out = np.empty(omega.shape[0], dtype=complex)
    step = max(1, chunk // Y.shape[0])
    for a in range(0, omega.shape[0], step):
        ph = omega[a:a + step] @ Y.T
        out[a:a + step] = np.cos(ph).mean(axis=1) + 1j * np.sin(ph).mean(axis=1)
    return out


# ---------------------------------------------------------------------------
# objective


def _unit_if_zero(sd):
    # constant views carry no scale; leave them unnormalized
    return np.where(sd > 0, sd, 1.0)


def cf_nodes(samples, projections, weight: CFWeightSpec):
    """Frequency vectors for the Monte-Carlo CF objective.

    ``projections`` is a K x J direction matrix (1D views) or ``"pairwise"``
    (all coordinate pairs, product weight). Each view is first normalized to
    unit sample standard deviation per axis, then ``weight.n_nodes`` nodes are
    drawn from the Gaussian weight. Returns ``(omega, view_index)`` where row
    ``omega[r]`` is a J-vector so that ``omega[r]' Y`` is the CF argument.
    """
    Y = as_samples(samples).data
    rng = np.random.default_rng(weight.seed)
    J = Y.shape[1]
    blocks, index = [], []
    if isinstance(projections, str):
        if projections != PAIRWISE:
            raise ValueError(f"unknown projection design {projections!r}")
        sd = _unit_if_zero(Y.std(axis=0))
        v = 0
        for k in range(J):
            for l in range(k + 1, J):
                t = rng.standard_normal((weight.n_nodes, 2)) * weight.std
                om = np.zeros((weight.n_nodes, J))
                om[:, k] = t[:, 0] / sd[k]
                om[:, l] = t[:, 1] / sd[l]
                blocks.append(om)
                index.append(np.full(weight.n_nodes, v))
                v += 1
    else:
        B = as_directions(projections)
        if B.shape[1] != J:
            raise ValueError("projection length does not match the samples")
        sd = _unit_if_zero((Y @ B.T).std(axis=0))
        for k in range(B.shape[0]):
            t = rng.standard_normal(weight.n_nodes) * weight.std
            blocks.append(np.outer(t, B[k] / sd[k]))
            index.append(np.full(weight.n_nodes, k))
    return np.vstack(blocks), np.concatenate(index)


class _CFProblem:
    def __init__(self, A, samples, projections, weight: CFWeightSpec, specs: Sequence[BinSpec]):
        self.A = as_matrix(A)
        Y = as_samples(samples).data
        if len(specs) != self.A.shape[1]:
            raise ValueError("need one bin spec per latent component")
        self.omega, view = cf_nodes(Y, projections, weight)
        counts = np.bincount(view)
        self.node_weight = 1.0 / counts[view]
        self.ecf = _ecf_vectors(self.omega, Y)
        S = self.omega @ self.A  # per-link frequency at every node
        self.specs = list(specs)
        self.psi_parts = [component_cfs(sp, S[:, i]) for i, sp in enumerate(self.specs)]

    def link_cfs(self, weights):
        return np.stack([P @ w for P, w in zip(self.psi_parts, weights)], axis=1)

    def objective(self, weights) -> float:
        model = np.prod(self.link_cfs(weights), axis=1)
        return float(np.sum(self.node_weight * np.abs(self.ecf - model) ** 2))

    def link_qp(self, weights, i):
        cfs = self.link_cfs(weights)
        rest = np.prod(np.delete(cfs, i, axis=1), axis=1)
        D = self.psi_parts[i] * rest[:, None]
        Dw = D * self.node_weight[:, None]
        P = 2.0 * np.real(D.conj().T @ Dw)
        q = -2.0 * np.real(Dw.conj().T @ self.ecf)
        return P, q


def cf_objective(A, models: Sequence[MixtureLinkModel], projections, samples,
                 weight: CFWeightSpec) -> float:
    """Sum over views of the node-averaged ``|ecf - model cf|**2``."""
    prob = _CFProblem(A, samples, projections, weight, [m.spec for m in models])
    return prob.objective([m.weights for m in models])


# ---------------------------------------------------------------------------
# simplex QP


def simplex_qp(P, q, x0=None, tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    """Minimize ``x'Px/2 + q'x`` over the probability simplex (primal active set).

    A ridge of relative size 1e-12 toward the uniform point breaks ties
    between equally good solutions when ``P`` is singular.
    """
    P = 0.5 * (np.asarray(P, dtype=float) + np.asarray(P, dtype=float).T)
    q = np.asarray(q, dtype=float)
    n = q.size
    if n == 1:
        return np.ones(1)
    scale = max(np.max(np.abs(np.diag(P))), np.max(np.abs(q)), 1e-300)
    eps = 1e-12 * scale
    u = np.full(n, 1.0 / n)
    P = P + 2 * eps * np.eye(n)
    q = q - 2 * eps * u

    if x0 is None or np.any(np.asarray(x0) < 0) or abs(np.sum(x0) - 1) > 1e-9:
        x = u.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()
        x /= x.sum()
    active = x <= 0
    x[active] = 0.0
    gtol = tol * scale
    for _ in range(max_iter):
        g = P @ x + q
        F = np.flatnonzero(~active)
        nf = F.size
        K = np.zeros((nf + 1, nf + 1))
        K[:nf, :nf] = P[np.ix_(F, F)]
        K[:nf, nf] = -1.0
        K[nf, :nf] = -1.0
        rhs = np.concatenate([-g[F], [0.0]])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        p, nu = sol[:nf], sol[nf]
        if np.max(np.abs(p), initial=0.0) <= 1e-14:
            A_idx = np.flatnonzero(active)
            if A_idx.size == 0:
                break
            lam = g[A_idx] - nu
            j = np.argmin(lam)
            if lam[j] >= -gtol:
                break
            active[A_idx[j]] = False
            continue
        alpha, block = 1.0, None
        neg = p < 0
        if np.any(neg):
            ratios = -x[F][neg] / p[neg]
            r = np.argmin(ratios)
            if ratios[r] < 1.0:
                alpha, block = ratios[r], F[neg][r]
        x[F] += alpha * p
        if block is not None:
            x[block] = 0.0
            active[block] = True
    x = np.clip(x, 0.0, None)
    return x / x.sum()


# ---------------------------------------------------------------------------
# fitting


@dataclass
class CFFitOptions:
    tol: float = 1e-9         # relative objective decrease per sweep
    max_sweeps: int = 200
    qp_tol: float = 1e-10
    extrapolate: bool = True  # line search along each sweep's net move


def _extrapolate(prob: _CFProblem, before, after, obj):
    """Push further along ``after - before`` while the objective keeps falling.

    Steps stay on the simplex (the move sums to zero per link; the step is
    capped where a weight would turn negative), so the result is feasible
    and never worse than ``after``.
    """
    d = [a - b for a, b in zip(after, before)]
    cap = np.inf
    for a, dd in zip(after, d):
        neg = dd < 0
        if np.any(neg):
            cap = min(cap, np.min(a[neg] / -dd[neg]))
    best_w, best = after, obj
    step = 1.0
    while step <= cap:
        trial = [a + step * dd for a, dd in zip(after, d)]
        val = prob.objective(trial)
        if val >= best:
            break
        best_w, best = trial, val
        step *= 2.0
    if best_w is not after:
        best_w = [np.clip(w, 0.0, None) / np.clip(w, 0.0, None).sum() for w in best_w]
        val = prob.objective(best_w)
        if val <= obj:
            return best_w, val
    return after, obj


@dataclass
class CFFitResult:
    models: list
    objective_trace: list = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


def fit_cf_gmm(A, samples, projections, bins: Sequence[BinSpec], weight: CFWeightSpec,
               options: Optional[CFFitOptions] = None,
               init: Optional[Sequence[MixtureLinkModel]] = None) -> CFFitResult:
    """Fit per-link mixture weights by cyclic simplex-QP coordinate descent.

    ``projections`` is a direction matrix / ProjectionSet for 1D views or
    ``"pairwise"`` for all 2D coordinate pairs. The node set is drawn once
    and reused, so the objective is deterministic and never increases
    across link updates.
    """
    options = options or CFFitOptions()
    prob = _CFProblem(A, samples, projections, weight, bins)
    if init is None:
        weights = [np.full(sp.n_weights, 1.0 / sp.n_weights) for sp in bins]
    else:
        weights = [np.asarray(m.weights, dtype=float).copy() for m in init]
    obj = prob.objective(weights)
    trace = [obj]
    converged = False
    sweep = 0
    for sweep in range(1, options.max_sweeps + 1):
        start, before = obj, weights
        for i in range(len(weights)):
            P, q = prob.link_qp(weights, i)
            cand = simplex_qp(P, q, x0=weights[i], tol=options.qp_tol)
            trial = list(weights)
            trial[i] = cand
            new = prob.objective(trial)
            if new <= obj:
                weights, obj = trial, new
            trace.append(obj)
        if options.extrapolate:
            weights, obj = _extrapolate(prob, before, weights, obj)
            trace.append(obj)
        if start - obj <= options.tol * max(abs(start), 1e-300):
            converged = True
            break
    if not converged:
        log.debug("CF fit stopped after %d sweeps without meeting tol", sweep)
    models = [MixtureLinkModel.from_weights(sp, w) for sp, w in zip(bins, weights)]
    return CFFitResult(models, trace, sweep, converged)


# ---------------------------------------------------------------------------
# distribution functions


def _breakpoints(model: MixtureLinkModel):
    xs = np.concatenate([[0.0], model.bin_edges])
    Fb = model.atom_at_zero + np.concatenate([[0.0], np.cumsum(model.bin_weights)])
    return xs, Fb


def mixture_cdf(model: MixtureLinkModel, x):
    """CDF: atom at 0, linear within bins, exponential beyond the last edge."""
    x_arr = np.asarray(x, dtype=float)
    xs, Fb = _breakpoints(model)
    inner = np.interp(x_arr, xs, Fb)
    em = xs[-1]
    over = np.clip(x_arr - em, 0.0, None)
    tail = Fb[-1] + model.tail_weight * -np.expm1(-model.tail_rate * over)
    F = np.where(x_arr < 0, 0.0, np.where(x_arr > em, tail, inner))
    return float(F) if np.ndim(x) == 0 else F


def mixture_quantile(model: MixtureLinkModel, p):
    """Generalized inverse ``inf{x : F(x) >= p}`` for ``p`` in (0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    xs, Fb = _breakpoints(model)
    k = np.searchsorted(Fb, p_arr, side="left")
    out = np.zeros_like(p_arr)
    m = xs.size - 1
    inside = (k >= 1) & (k <= m)
    kk = np.clip(k, 1, m)
    frac = (p_arr - Fb[kk - 1]) / np.where(Fb[kk] > Fb[kk - 1], Fb[kk] - Fb[kk - 1], 1.0)
    out = np.where(inside, xs[kk - 1] + frac * (xs[kk] - xs[kk - 1]), out)
    beyond = k > m
    if model.tail_weight > 0:
        resid = np.clip((p_arr - Fb[-1]) / model.tail_weight, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            tailx = xs[-1] - np.log1p(-resid) / model.tail_rate
        out = np.where(beyond, tailx, out)
    else:
        out = np.where(beyond, xs[-1], out)
    return float(out) if np.ndim(p) == 0 else out
