"""Error metrics: Mallows (L1 quantile) distance and log-ratio errors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateDistributionError

__all__ = [
    "CdfCurve",
    "mallows_distance",
    "normalized_mallows",
    "log_abs_error",
    "mm1_curve",
    "mm1_std",
    "mixture_curve",
]


@dataclass(frozen=True)
class CdfCurve:
    """CDF tabulated on an increasing grid, optionally with an exact quantile.

    Between grid points the CDF is taken as linear. An atom is represented
    by a grid point where the CDF already holds the atom's mass (e.g. an
    atom at zero: ``x[0] = 0``, ``F[0] = p0``). When ``quantile`` is given it
    is used instead of inverting the table, and ``std`` may carry the exact
    standard deviation.
    """

    x: np.ndarray
    values: np.ndarray
    quantile: Optional[Callable] = None
    std: Optional[float] = None
    tag: str = ""

    def __post_init__(self):
        x = np.atleast_1d(np.array(self.x, dtype=float))
        F = np.atleast_1d(np.array(self.values, dtype=float))
        if x.shape != F.shape or x.ndim != 1 or x.size < 1:
            raise ValueError("x and values must be 1-D arrays of equal length")
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise ValueError("grid must be finite and strictly increasing")
        if np.any(F < 0) or np.any(F > 1) or np.any(np.diff(F) < 0):
            raise ValueError("CDF values must be nondecreasing within [0, 1]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", F)

    def inverse(self, p) -> np.ndarray:
        """Generalized inverse ``inf{x : F(x) >= p}``."""
        p = np.asarray(p, dtype=float)
        if self.quantile is not None:
            return np.asarray(self.quantile(p), dtype=float)
        x, F = self.x, self.values
        k = np.searchsorted(F, p, side="left")
        k = np.clip(k, 0, x.size - 1)  # mass beyond the grid sits at its right end
        lo = np.clip(k - 1, 0, x.size - 1)
        denom = F[k] - F[lo]
        frac = np.where(denom > 0, (p - F[lo]) / np.where(denom > 0, denom, 1.0), 1.0)
        frac = np.clip(frac, 0.0, 1.0)
        return np.where(k == 0, x[0], x[lo] + frac * (x[k] - x[lo]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("x,F\n")
            for a, b in zip(self.x, self.values):
                fh.write(f"{a:.17g},{b:.17g}\n")


def _nodes(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one quantile node")
    return (np.arange(n) + 0.5) / n


def mallows_distance(F: CdfCurve, G: CdfCurve, n_quantile_nodes: int = 10_000) -> float:
    """Midpoint rule for ``int_0^1 |F^-1(p) - G^-1(p)| dp``."""
    p = _nodes(n_quantile_nodes)
    return float(np.mean(np.abs(F.inverse(p) - G.inverse(p))))


def _curve_std(F: CdfCurve, n: int) -> float:
    if F.std is not None:
        return float(F.std)
    q = F.inverse(_nodes(n))
    return float(np.std(q))


def normalized_mallows(F_true: CdfCurve, F_hat: CdfCurve, n_nodes: int = 10_000) -> float:
    """Mallows distance divided by the standard deviation of ``F_true``."""
    s = _curve_std(F_true, n_nodes)
    if not s > 0:
        raise DegenerateDistributionError("true distribution has zero standard deviation")
    return mallows_distance(F_true, F_hat, n_nodes) / s


def log_abs_error(theta_hat, theta) -> np.ndarray:
    """Elementwise ``|log theta_hat - log theta|``."""
    a = np.asarray(theta_hat, dtype=float)
    b = np.asarray(theta, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("log error needs strictly positive entries")
    return np.abs(np.log(a) - np.log(b))


# ---------------------------------------------------------------------------
# curves for the delay models


def mm1_std(u: float, v: float) -> float:
    # P(X > x) = u exp(-x/v): E[X] = u v, E[X^2] = 2 u v^2, so var = u v^2 (2 - u)
    return float(np.sqrt(u * v * v * (2.0 - u)))


def mm1_curve(u: float, v: float, n_grid: int = 2001) -> CdfCurve:
    """Exact M/M/1 waiting-time law: atom ``1 - u`` at 0, exponential tail mean ``v``."""
    if not (0 < u < 1 and v > 0):
        raise ValueError("need 0 < u < 1 and v > 0")

    def quantile(p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = -v * np.log(np.clip((1 - p) / u, 1e-300, None))
        return np.where(p <= 1 - u, 0.0, x)

    x = np.linspace(0.0, -v * np.log(1e-6 / u), n_grid)
    F = 1 - u * np.exp(-x / v)
    return CdfCurve(x, F, quantile=quantile, std=mm1_std(u, v), tag="mm1")


def mixture_curve(model, n_grid: int = 2001) -> CdfCurve:
    """CdfCurve of a fitted MixtureLinkModel with its exact quantile function."""
    from .cf_gmm import mixture_cdf, mixture_quantile

    top = model.bin_edges[-1] + (np.log(1e6) / model.tail_rate if model.tail_weight > 0 else 0.0)
    x = np.unique(np.concatenate([[0.0], model.bin_edges, np.linspace(0.0, top, n_grid)]))
    F = np.clip(mixture_cdf(model, x), 0.0, 1.0)
    F = np.maximum.accumulate(F)
    return CdfCurve(x, F, quantile=lambda p: mixture_quantile(model, p), tag="mixture")
