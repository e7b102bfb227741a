"""Data generators and the three simulation studies.

* ``run_asymptotic_study``: limit standard deviations of the optimal-1D,
  2D and random-1D estimators (analytic, no sampling of data).
* ``run_traffic_experiment``: Gaussian OD traffic with a power mean-variance
  relation on a single router; MLE / 1D / 2D / moment estimators.
* ``run_delay_experiment``: M/M/1 link delays on a tree; CF-GMM mixture fits
  from correlation-based 1D, random 1D and pairwise 2D projections.

Every run owns an RNG stream derived from ``(seed, purpose, run index)`` so
results do not depend on scheduling or on which estimators are enabled.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cf_gmm import CFFitOptions, CFWeightSpec, bins_from_quantiles, fit_cf_gmm, mixture_cdf
from .estimators import (EstimatorOptions, MeanVarianceRelation, SampleBlock, estimate_1d,
                         estimate_2d, estimate_mle, estimate_moment, plugin_optimal_projections)
from .gaussian import (GaussianModel, asymptotic_cov_1d, asymptotic_cov_2d,
                       model_covariance, optimal_projections, random_projections)
from .metrics import log_abs_error, mixture_curve, mm1_curve, normalized_mallows
from .topology import as_matrix, build_router_routing, build_tree_routing, four_leaf_tree, \
    load_tree_routing, two_leaf_tree

__all__ = [
    "derive_rng",
    "sample_gaussian_od",
    "sample_mm1_delay",
    "AsymptoticConfig",
    "AsymptoticStudy",
    "run_asymptotic_study",
    "TrafficExperimentConfig",
    "TrafficResult",
    "run_traffic_experiment",
    "DelayExperimentConfig",
    "DelayResult",
    "run_delay_experiment",
]

log = logging.getLogger(__name__)

_STREAMS = {
    "theta": 1,
    "od_means": 2,
    "traffic": 3,
    "delay_params": 4,
    "delay": 5,
    "random_projections": 6,
    "cf_nodes": 7,
}

TRAFFIC_ESTIMATORS = ("moment", "two_d", "one_d_opt", "mle")
DELAY_MODES = ("two_d", "one_d_cor", "one_d_rand")


def derive_rng(seed: int, stream: str, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, stream, index)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_STREAMS[stream], int(index)))
    return np.random.default_rng(ss)


def _derive_seed(seed: int, stream: str, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_STREAMS[stream], int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# generators


def sample_gaussian_od(A, means, relation: MeanVarianceRelation, n: int, rng: np.random.Generator):
    """Draw ``X_i ~ N(mu_i, phi mu_i**c)`` independently and return ``(X, Y)`` blocks."""
    means = np.asarray(means, dtype=float)
    if np.any(means <= 0):
        raise ValueError("OD means must be positive")
    M = as_matrix(A)
    sd = np.sqrt(relation.variance(means))
    X = means + sd * rng.standard_normal((n, means.size))
    return SampleBlock(X), SampleBlock(X @ M.T)


def sample_mm1_delay(u: float, v: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """M/M/1 waiting times: 0 w.p. ``1 - u``, else exponential with mean ``v``."""
    if not (0 < u < 1):
        raise ValueError("utilization must be in (0, 1)")
    if not v > 0:
        raise ValueError("scale must be positive")
    busy = rng.random(n) < u
    return np.where(busy, rng.exponential(v, n), 0.0)


# ---------------------------------------------------------------------------
# asymptotic study


@dataclass
class AsymptoticConfig:
    topology: str = "router"   # "router", "four_leaf", "two_leaf" or an adjacency file
    n_in: int = 4
    n_out: int = 4
    theta: Optional[tuple] = None  # default: i.i.d. Exp(1) drawn from the seed
    K_list: tuple = (32, 160)
    n_replicates: int = 100
    seed: int = 20070101
    threads: int = 1

    def routing(self):
        if self.topology == "router":
            return build_router_routing(self.n_in, self.n_out, drop_last_row=True)
        if self.topology == "four_leaf":
            return build_tree_routing(four_leaf_tree())
        if self.topology == "two_leaf":
            return build_tree_routing(two_leaf_tree())
        return load_tree_routing(self.topology)

    def thetas(self, I: int) -> np.ndarray:
        if self.theta is not None:
            t = np.asarray(self.theta, dtype=float)
            if t.shape != (I,):
                raise ValueError(f"theta needs {I} entries")
            return t
        return derive_rng(self.seed, "theta").exponential(1.0, I)


@dataclass
class AsymptoticStudy:
    theta: np.ndarray
    columns: dict  # name -> per-parameter limit std

    def table(self):
        names = list(self.columns)
        return names, np.column_stack([self.columns[k] for k in names])


def run_asymptotic_study(A, theta, K_list: Sequence[int] = (), n_replicates: int = 100,
                         seed: int = 0, threads: int = 1) -> AsymptoticStudy:
    """Per-parameter limit standard deviations of the competing estimators.

    Random-1D columns report the median over ``n_replicates`` independent
    projection draws of size K.
    """
    model = GaussianModel(theta)
    sigma = model_covariance(A, model)
    cols = {
        "optimal_1d": asymptotic_cov_1d(A, model, optimal_projections(A, sigma)).std,
        "two_d": asymptotic_cov_2d(A, model).std,
    }
    for K in K_list:
        def one(r, K=K):
            rng = derive_rng(seed, "random_projections", K * 1_000_003 + r)
            return asymptotic_cov_1d(A, model, random_projections(sigma, K, rng)).std
        stds = np.array(_map(one, range(n_replicates), threads))
        cols[f"random_1d_K{K}"] = np.median(stds, axis=0)
    return AsymptoticStudy(np.asarray(theta, dtype=float), cols)


# ---------------------------------------------------------------------------
# traffic experiment


@dataclass
class TrafficExperimentConfig:
    n_in: int = 4
    n_out: int = 4
    od_means: Optional[tuple] = None
    od_mean_low: float = 1.0
    od_mean_high: float = 100.0
    phi: float = 1.0
    c: float = 2.0
    n_samples: int = 1000
    n_runs: int = 100
    seed: int = 20070101
    estimators: tuple = TRAFFIC_ESTIMATORS
    threads: int = 1

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        bad = set(self.estimators) - set(TRAFFIC_ESTIMATORS)
        if bad:
            raise ValueError(f"unknown estimators {sorted(bad)}")

    @property
    def relation(self) -> MeanVarianceRelation:
        return MeanVarianceRelation(self.phi, self.c)

    def routing(self):
        return build_router_routing(self.n_in, self.n_out, drop_last_row=True)

    def means(self) -> np.ndarray:
        """OD means: given explicitly, or log-uniform on [low, high] from the seed."""
        I = self.n_in * self.n_out
        if self.od_means is not None:
            m = np.asarray(self.od_means, dtype=float)
            if m.shape != (I,):
                raise ValueError(f"od_means needs {I} entries")
            return m
        rng = derive_rng(self.seed, "od_means")
        return np.exp(rng.uniform(np.log(self.od_mean_low), np.log(self.od_mean_high), I))


@dataclass
class TrafficResult:
    means: np.ndarray
    errors: dict  # estimator -> (n_runs, I), NaN where the estimator failed
    failures: dict

    @property
    def medians(self) -> dict:
        return {k: np.nanmedian(v, axis=0) if np.any(np.isfinite(v)) else np.full(v.shape[1], np.nan)
                for k, v in self.errors.items()}


def _traffic_run(config: TrafficExperimentConfig, A, means, r: int) -> dict:
    rel = config.relation
    rng = derive_rng(config.seed, "traffic", r)
    _, Y = sample_gaussian_od(A, means, rel, config.n_samples, rng)
    Y = SampleBlock(Y.data, {"seed": config.seed, "stream": "traffic", "run": r})
    out = {}
    mm = estimate_moment(A, Y, rel)
    start = mm.mu_hat
    opts = EstimatorOptions()
    for name in config.estimators:
        try:
            if name == "moment":
                rep = mm
            elif name == "mle":
                rep = estimate_mle(A, Y, start, opts, relation=rel)
            elif name == "one_d_opt":
                rep = estimate_1d(A, Y, plugin_optimal_projections(A, Y), start, opts, relation=rel)
            else:
                rep = estimate_2d(A, Y, start, opts, relation=rel)
            if not rep.converged and name != "moment":
                raise RuntimeError(rep.message)
            out[name] = log_abs_error(rep.mu_hat, means)
        except Exception as exc:  # estimator failures are tallied, never fatal
            log.info("run %d: %s failed: %s", r, name, exc)
            out[name] = None
    return out


def run_traffic_experiment(config: TrafficExperimentConfig) -> TrafficResult:
    """Median ``|log mu_hat - log mu|`` per OD pair over independent runs."""
    A = config.routing()
    means = config.means()
    runs = _map(lambda r: _traffic_run(config, A, means, r), range(config.n_runs), config.threads)
    I = means.size
    errors, failures = {}, {}
    for name in config.estimators:
        E = np.full((config.n_runs, I), np.nan)
        for r, res in enumerate(runs):
            if res[name] is not None:
                E[r] = res[name]
        errors[name] = E
        failures[name] = int(sum(res[name] is None for res in runs))
    return TrafficResult(means, errors, failures)


# ---------------------------------------------------------------------------
# delay experiment


@dataclass
class DelayExperimentConfig:
    tree: str = "four_leaf"
    u_low: float = 0.3
    u_high: float = 0.7
    v_mean: float = 3.0
    n_samples: int = 1000
    n_runs: int = 100
    n_bins: int = 10
    weight_std: float = 5.0
    n_nodes: int = 64
    modes: tuple = DELAY_MODES
    seed: int = 20070101
    redraw_params: bool = False
    max_sweeps: int = 500
    cdf_runs: tuple = (0,)
    threads: int = 1

    def __post_init__(self):
        if not (0 < self.u_low <= self.u_high < 1):
            raise ValueError("need 0 < u_low <= u_high < 1")
        if not self.v_mean > 0:
            raise ValueError("v_mean must be positive")
        if self.n_samples < 2 or self.n_runs < 1:
            raise ValueError("n_samples must be >= 2 and n_runs >= 1")
        bad = set(self.modes) - set(DELAY_MODES)
        if bad:
            raise ValueError(f"unknown projection modes {sorted(bad)}")

    def routing(self):
        if self.tree == "four_leaf":
            return build_tree_routing(four_leaf_tree())
        if self.tree == "two_leaf":
            return build_tree_routing(two_leaf_tree())
        return load_tree_routing(self.tree)

    def link_params(self, I: int, run: int = 0):
        """Per-link ``(u, v)``; fixed across runs unless ``redraw_params``."""
        rng = derive_rng(self.seed, "delay_params", run if self.redraw_params else 0)
        u = rng.uniform(self.u_low, self.u_high, I)
        v = rng.exponential(self.v_mean, I)
        return u, v


@dataclass
class DelayResult:
    distances: dict  # mode -> (n_runs, I) normalized Mallows, NaN on failure
    failures: dict
    params: list     # per run (u, v)
    cdf_curves: dict = field(default_factory=dict)  # run -> {link: (x, {name: F})}

    @property
    def medians(self) -> dict:
        return {k: np.nanmedian(v, axis=0) if np.any(np.isfinite(v)) else np.full(v.shape[1], np.nan)
                for k, v in self.distances.items()}


def _delay_run(config: DelayExperimentConfig, A, r: int):
    M = as_matrix(A)
    I = M.shape[1]
    u, v = config.link_params(I, r)
    rng = derive_rng(config.seed, "delay", r)
    X = np.column_stack([sample_mm1_delay(u[i], v[i], config.n_samples, rng) for i in range(I)])
    Y = SampleBlock(X @ M.T, {"seed": config.seed, "stream": "delay", "run": r})
    bins = [bins_from_quantiles(lambda p, s=v[i]: -s * math.log1p(-p), config.n_bins) for i in range(I)]
    weight = CFWeightSpec("gaussian", config.weight_std, config.n_nodes, _derive_seed(config.seed, "cf_nodes", r))
    opts = CFFitOptions(max_sweeps=config.max_sweeps)
    truth = [mm1_curve(u[i], v[i]) for i in range(I)]
    dist, fitted = {}, {}
    for mode in config.modes:
        try:
            if mode == "two_d":
                proj = "pairwise"
            elif mode == "one_d_cor":
                proj = plugin_optimal_projections(M, Y)
            else:
                prng = derive_rng(config.seed, "random_projections", r)
                proj = random_projections(Y.covariance(), I, prng)
            fit = fit_cf_gmm(M, Y, proj, bins, weight, opts)
            fitted[mode] = fit.models
            dist[mode] = np.array([normalized_mallows(truth[i], mixture_curve(fit.models[i]))
                                   for i in range(I)])
        except Exception as exc:
            log.info("run %d: %s failed: %s", r, mode, exc)
            dist[mode] = None
    curves = None
    if r in config.cdf_runs:
        curves = {}
        for i in range(I):
            top = -v[i] * math.log(1e-3 / u[i])
            x = np.linspace(0.0, top, 401)
            cols = {"true": 1 - u[i] * np.exp(-x / v[i])}
            for mode, models in fitted.items():
                cols[mode] = mixture_cdf(models[i], x)
            curves[i] = (x, cols)
    return dist, (u, v), curves


def run_delay_experiment(config: DelayExperimentConfig) -> DelayResult:
    """Median normalized Mallows distance per link for each projection mode."""
    A = config.routing()
    I = A.I
    runs = _map(lambda r: _delay_run(config, A, r), range(config.n_runs), config.threads)
    distances, failures = {}, {}
    for mode in config.modes:
        D = np.full((config.n_runs, I), np.nan)
        for r, (dist, _, _) in enumerate(runs):
            if dist[mode] is not None:
                D[r] = dist[mode]
        distances[mode] = D
        failures[mode] = int(sum(d[mode] is None for d, _, _ in runs))
    curves = {r: c for r, (_, _, c) in enumerate(runs) if c is not None}
    return DelayResult(distances, failures, [p for _, p, _ in runs], curves)
