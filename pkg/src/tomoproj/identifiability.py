"""Identifiability of the latent distribution from 1D projections.

The law of ``X`` is determined (up to its mean) by the marginals of
``beta_k' Y`` iff every elementwise power ``M_n = (B A) ** n``, ``n >= 2``,
has full column rank. Only finitely many orders can be checked; structural
failures show up at small ``n``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .topology import as_matrix

__all__ = [
    "ProjectionSet",
    "IdentifiabilityReport",
    "as_directions",
    "power_matrix",
    "check_identifiability",
    "two_leaf_determinant",
    "two_leaf_projections",
]


@dataclass(frozen=True)
class ProjectionSet:
    """K projection directions over measurement space, one per row.

    Rows must be nonzero and pairwise non-proportional. Functions that take
    projections also accept a raw K x J array, which skips these checks so
    that degenerate designs can be diagnosed rather than rejected.
    """

    directions: np.ndarray
    ridge_applied: bool = False

    def __post_init__(self):
        B = np.atleast_2d(np.array(self.directions, dtype=float))
        if B.ndim != 2:
            raise ValueError("directions must be a K x J matrix")
        if not np.all(np.isfinite(B)):
            raise ValueError("directions must be finite")
        norms = np.linalg.norm(B, axis=1)
        if np.any(norms == 0):
            raise ValueError(f"zero projection rows {np.flatnonzero(norms == 0).tolist()}")
        U = B / norms[:, None]
        G = np.abs(U @ U.T)
        np.fill_diagonal(G, 0.0)
        dup = np.argwhere(np.triu(G > 1 - 1e-12))
        if dup.size:
            k, l = dup[0]
            raise ValueError(f"projections {k} and {l} are proportional")
        B.setflags(write=False)
        object.__setattr__(self, "directions", B)

    @property
    def K(self) -> int:
        return self.directions.shape[0]

    @property
    def J(self) -> int:
        return self.directions.shape[1]

    def gamma(self, A) -> np.ndarray:
        """K x I matrix with rows ``beta_k' A``."""
        return self.directions @ as_matrix(A)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.directions, dtype=dtype)


def as_directions(projections) -> np.ndarray:
    if isinstance(projections, ProjectionSet):
        return projections.directions
    return np.atleast_2d(np.asarray(projections, dtype=float))


@dataclass
class IdentifiabilityReport:
    identifiable_all: bool
    identifiable_even: bool
    first_failing_order: Optional[int]
    rank_by_order: list = field(default_factory=list)
    max_order_checked: int = 0
    n_components: int = 0
    n_projections: int = 0
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def power_matrix(projections, A, n: int) -> np.ndarray:
    """Entry (k, i) is ``(beta_k' A^i) ** n``."""
    if n < 1:
        raise ValueError("order n must be >= 1")
    B = as_directions(projections)
    M = as_matrix(A)
    if B.shape[1] != M.shape[0]:
        raise ValueError(f"projections have {B.shape[1]} columns but A has {M.shape[0]} rows")
    return (B @ M) ** n


def _rank(M: np.ndarray, tol: float) -> int:
    # sup-norm row scaling keeps |gamma|**n from swamping the small rows
    scale = np.max(np.abs(M), axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    s = np.linalg.svd(M / scale, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def check_identifiability(projections, A, max_order: int = 20,
                          rank_tolerance: float = 1e-9) -> IdentifiabilityReport:
    """Rank test of ``M_n`` for ``n = 2 .. max_order``.

    ``identifiable_even`` only looks at even orders (even cumulants);
    ``identifiable_all`` needs every order. Fewer projections than
    components is reported as non-identifiable, never raised.
    """
    if max_order < 2:
        raise ValueError("max_order must be >= 2")
    B = as_directions(projections)
    I = as_matrix(A).shape[1]
    ranks = []
    for n in range(2, max_order + 1):
        ranks.append((n, _rank(power_matrix(B, A, n), rank_tolerance)))
    failing = [n for n, r in ranks if r < I]
    reason = ""
    if B.shape[0] < I:
        reason = f"K = {B.shape[0]} projections < I = {I} components"
    elif failing:
        reason = f"M_n rank deficient at orders {failing}"
    return IdentifiabilityReport(
        identifiable_all=not failing,
        identifiable_even=not any(n % 2 == 0 for n in failing),
        first_failing_order=failing[0] if failing else None,
        rank_by_order=[[n, r] for n, r in ranks],
        max_order_checked=max_order,
        n_components=I,
        n_projections=B.shape[0],
        reason=reason,
    )


def two_leaf_determinant(a: float, n: int) -> float:
    """Closed-form ``det(M_n)`` for projections ``Y1, Y2, Y1 + a Y2`` on the two-leaf tree."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return (1 + a) ** n - a ** n - 1


def two_leaf_projections(a: float) -> np.ndarray:
    """Raw directions ``[(1, 0), (0, 1), (1, a)]``; ``a = 0`` duplicates a row."""
    return np.array([[1.0, 0.0], [0.0, 1.0], [1.0, a]])
