"""Routing matrices for tree (delay) and single-router (traffic) networks.

A routing matrix ``A`` is a J x I 0/1 matrix with ``Y = A X``: rows are
measurements, columns are latent components (links or OD pairs).
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import MalformedTopologyError

__all__ = [
    "RoutingMatrix",
    "RoutingDiagnostics",
    "build_tree_routing",
    "build_router_routing",
    "validate_routing",
    "two_leaf_tree",
    "four_leaf_tree",
    "read_adjacency",
    "load_tree_routing",
    "write_routing_csv",
    "read_routing_csv",
]


@dataclass(frozen=True)
class RoutingMatrix:
    """Binary J x I incidence matrix mapping latent components to measurements."""

    matrix: np.ndarray
    component_labels: Optional[tuple] = None
    measurement_labels: Optional[tuple] = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.size == 0:
            raise MalformedTopologyError("routing matrix must be a non-empty 2-D array")
        if not np.all((m == 0) | (m == 1)):
            raise MalformedTopologyError("routing matrix entries must be 0 or 1")
        if np.any(m.sum(axis=0) == 0):
            cols = np.flatnonzero(m.sum(axis=0) == 0).tolist()
            raise MalformedTopologyError(f"all-zero columns {cols}")
        if np.any(m.sum(axis=1) == 0):
            rows = np.flatnonzero(m.sum(axis=1) == 0).tolist()
            raise MalformedTopologyError(f"all-zero rows {rows}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        for name, size in (("component_labels", m.shape[1]), ("measurement_labels", m.shape[0])):
            labels = getattr(self, name)
            if labels is not None:
                labels = tuple(str(x) for x in labels)
                if len(labels) != size:
                    raise MalformedTopologyError(f"{name} has {len(labels)} entries, expected {size}")
                object.__setattr__(self, name, labels)

    @property
    def J(self) -> int:
        return self.matrix.shape[0]

    @property
    def I(self) -> int:  # noqa: E743
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def as_matrix(A) -> np.ndarray:
    """Return the float ndarray behind a RoutingMatrix or array-like."""
    if isinstance(A, RoutingMatrix):
        return A.matrix
    return np.asarray(A, dtype=float)


# ---------------------------------------------------------------------------
# trees


def two_leaf_tree() -> list:
    """Parent list of the two-leaf tree: root -> branch node -> two leaves."""
    return [-1, 0, 1, 1]


def four_leaf_tree() -> list:
    """Parent list of the four-leaf binary tree (7 links, 4 leaves)."""
    return [-1, 0, 1, 1, 2, 2, 3, 3]


def _children(parents: Sequence[int]):
    n = len(parents)
    roots = [v for v, p in enumerate(parents) if p is None or p < 0]
    if len(roots) != 1:
        raise MalformedTopologyError(f"tree must have exactly one root, found {len(roots)}")
    kids = [[] for _ in range(n)]
    for v, p in enumerate(parents):
        if p is None or p < 0:
            continue
        if not 0 <= p < n:
            raise MalformedTopologyError(f"node {v} has out-of-range parent {p}")
        if p == v:
            raise MalformedTopologyError(f"node {v} is its own parent")
        kids[p].append(v)
    return roots[0], kids


def build_tree_routing(parents: Sequence[int], leaf_order: Optional[Sequence[int]] = None,
                       node_names: Optional[Sequence[str]] = None) -> RoutingMatrix:
    """Routing matrix of a rooted tree probed from its root.

    Parameters
    ----------
    parents : sequence of int
        ``parents[v]`` is the parent of node ``v``; the root has ``-1``.
        Children keep the order in which they appear in the list.
    leaf_order : sequence of int, optional
        Node ids of the leaves in measurement order. Defaults to the
        left-to-right (depth-first) order of the leaves.
    node_names : sequence of str, optional
        Used to label edges ``"parent-child"`` and measurements.

    Edges are indexed breadth-first, left to right; edge ``e`` is the link
    into its child node. Row ``j`` marks the edges on the root-to-leaf path.
    """
    parents = list(parents)
    root, kids = _children(parents)

    # breadth-first edge numbering; doubles as a connectivity / cycle check
    edge_of = {}
    order = deque([root])
    seen = {root}
    while order:
        v = order.popleft()
        for c in kids[v]:
            if c in seen:
                raise MalformedTopologyError("cycle detected in tree")
            seen.add(c)
            edge_of[c] = len(edge_of)
            order.append(c)
    if len(seen) != len(parents):
        missing = sorted(set(range(len(parents))) - seen)
        raise MalformedTopologyError(f"nodes {missing} are not connected to the root")

    def dfs_leaves(v):
        if not kids[v]:
            return [v]
        out = []
        for c in kids[v]:
            out.extend(dfs_leaves(c))
        return out

    all_leaves = [v for v in dfs_leaves(root) if v != root]
    if leaf_order is None:
        leaf_order = all_leaves
    else:
        leaf_order = list(leaf_order)
        if sorted(leaf_order) != sorted(all_leaves):
            raise MalformedTopologyError("leaf_order must list every leaf exactly once")
    if len(leaf_order) < 2:
        raise MalformedTopologyError("tomography needs at least two leaves")

    A = np.zeros((len(leaf_order), len(edge_of)))
    for j, leaf in enumerate(leaf_order):
        v = leaf
        while v != root:
            A[j, edge_of[v]] = 1.0
            v = parents[v]

    comp_labels = meas_labels = None
    if node_names is not None:
        by_edge = sorted(edge_of, key=edge_of.get)
        comp_labels = tuple(f"{node_names[parents[c]]}-{node_names[c]}" for c in by_edge)
        meas_labels = tuple(str(node_names[v]) for v in leaf_order)
    return RoutingMatrix(A, comp_labels, meas_labels)


def read_adjacency(path) -> tuple:
    """Parse a ``child parent`` adjacency file; the root's parent is ``-``.

    Blank lines and ``#`` comments are ignored. Returns ``(parents, names)``
    where node ids follow first appearance in the file.
    """
    names: list = []
    index: dict = {}
    pairs = []

    def node(name):
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MalformedTopologyError(f"{path}:{lineno}: expected 'child parent', got {raw!r}")
        child, parent = parts
        c = node(child)
        p = None if parent == "-" else node(parent)
        pairs.append((c, p))

    parents = [None] * len(names)
    assigned = set()
    for c, p in pairs:
        if c in assigned:
            raise MalformedTopologyError(f"node {names[c]!r} has more than one parent line")
        assigned.add(c)
        parents[c] = -1 if p is None else p
    unassigned = [names[v] for v in range(len(names)) if v not in assigned]
    if unassigned:
        raise MalformedTopologyError(f"nodes without a parent line: {unassigned}")
    return parents, names


def load_tree_routing(path) -> RoutingMatrix:
    parents, names = read_adjacency(path)
    return build_tree_routing(parents, node_names=names)


# ---------------------------------------------------------------------------
# single router


def build_router_routing(n_in: int, n_out: int, drop_last_row: bool = True) -> RoutingMatrix:
    """Incidence of OD pairs on the input and output links of one router.

    OD pair ``(o, d)`` is column ``o * n_out + d``. Rows are the ``n_in``
    input-link counts followed by the ``n_out`` output-link counts; the last
    row is linearly redundant (total in equals total out) and is dropped when
    ``drop_last_row`` is set. With 4 inputs and 4 outputs this gives the 7 x 16
    matrix used for the traffic study (a reconstruction; the original display
    of that matrix is not available).
    """
    if n_in < 1 or n_out < 1:
        raise ValueError("n_in and n_out must be >= 1")
    A = np.zeros((n_in + n_out, n_in * n_out))
    for o in range(n_in):
        for d in range(n_out):
            k = o * n_out + d
            A[o, k] = 1.0
            A[n_in + d, k] = 1.0
    comp = tuple(f"in{o}->out{d}" for o in range(n_in) for d in range(n_out))
    meas = tuple([f"in{o}" for o in range(n_in)] + [f"out{d}" for d in range(n_out)])
    if drop_last_row:
        if n_in + n_out < 2:
            raise ValueError("cannot drop a row from a single-row matrix")
        A, meas = A[:-1], meas[:-1]
    return RoutingMatrix(A, comp, meas)


# ---------------------------------------------------------------------------
# diagnostics and I/O


@dataclass
class RoutingDiagnostics:
    shape: tuple
    rank: int
    non_binary: list = field(default_factory=list)
    zero_rows: list = field(default_factory=list)
    zero_columns: list = field(default_factory=list)
    duplicate_columns: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.non_binary or self.zero_rows or self.zero_columns)


def validate_routing(A) -> RoutingDiagnostics:
    """Report structural problems of a candidate routing matrix (never raises)."""
    m = np.atleast_2d(np.asarray(as_matrix(A), dtype=float))
    diag = RoutingDiagnostics(shape=m.shape, rank=int(np.linalg.matrix_rank(m)) if m.size else 0)
    bad = np.argwhere(~((m == 0) | (m == 1)))
    diag.non_binary = [tuple(int(v) for v in ij) for ij in bad]
    diag.zero_rows = np.flatnonzero(~m.any(axis=1)).tolist()
    diag.zero_columns = np.flatnonzero(~m.any(axis=0)).tolist()
    for a in range(m.shape[1]):
        for b in range(a + 1, m.shape[1]):
            if np.array_equal(m[:, a], m[:, b]):
                diag.duplicate_columns.append((a, b))
    if diag.non_binary:
        diag.warnings.append(f"{len(diag.non_binary)} non-binary entries")
    if diag.zero_rows:
        diag.warnings.append(f"all-zero rows {diag.zero_rows}")
    if diag.zero_columns:
        diag.warnings.append(f"all-zero columns {diag.zero_columns}")
    for a, b in diag.duplicate_columns:
        diag.warnings.append(f"duplicate columns {a} and {b}")
    return diag


def write_routing_csv(A, path) -> None:
    m = as_matrix(A).astype(int)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerows(m.tolist())


def read_routing_csv(path) -> RoutingMatrix:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and not row[0].lstrip().startswith("#"):
                rows.append([float(x) for x in row])
    return RoutingMatrix(np.array(rows))
