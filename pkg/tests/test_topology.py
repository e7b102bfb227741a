import itertools

import numpy as np
import pytest

from tomoproj.errors import MalformedTopologyError
from tomoproj.topology import (RoutingMatrix, build_router_routing, build_tree_routing,
                               four_leaf_tree, load_tree_routing, read_routing_csv,
                               validate_routing, write_routing_csv)


def _paths_by_walking_up(parents):
    """Oracle: for every leaf, the set of nodes met walking up to the root."""
    children = {v: [c for c, p in enumerate(parents) if p == v] for v in range(len(parents))}
    leaves = [v for v in range(len(parents)) if not children[v]]
    out = {}
    for leaf in leaves:
        v, path = leaf, set()
        while parents[v] != -1:
            path.add(v)
            v = parents[v]
        out[leaf] = path
    return out


def test_two_leaf_matrix(two_leaf):
    np.testing.assert_array_equal(two_leaf.matrix, [[1, 1, 0], [1, 0, 1]])


def test_single_edge_rejected():
    with pytest.raises(MalformedTopologyError):
        build_tree_routing([-1, 0])


def test_cycle_and_disconnection_rejected():
    with pytest.raises(MalformedTopologyError):
        build_tree_routing([-1, 2, 1])
    with pytest.raises(MalformedTopologyError):
        build_tree_routing([-1, 0, -1, 2])


def test_four_leaf_matches_path_enumeration(four_leaf):
    parents = four_leaf_tree()
    A = four_leaf.matrix
    assert A.shape == (4, 7)
    paths = _paths_by_walking_up(parents)
    # each path is a set of child nodes; edge count along it must equal the row sum
    assert sorted(A.sum(axis=1)) == sorted(len(p) for p in paths.values())
    np.testing.assert_array_equal(A[:, 0], 1)
    # pairwise shared path lengths are label-free and must agree
    shared = sorted(len(paths[a] & paths[b]) for a, b in itertools.combinations(paths, 2))
    assert sorted((A @ A.T)[np.triu_indices(4, 1)].tolist()) == shared


def test_four_leaf_layout(four_leaf):
    np.testing.assert_array_equal(four_leaf.matrix, [
        [1, 1, 0, 1, 0, 0, 0],
        [1, 1, 0, 0, 1, 0, 0],
        [1, 0, 1, 0, 0, 1, 0],
        [1, 0, 1, 0, 0, 0, 1]])


def test_router_7x16(router):
    assert router.shape == (7, 16)
    np.testing.assert_array_equal(router.matrix.sum(axis=1), 4)
    full = build_router_routing(4, 4, drop_last_row=False).matrix
    np.testing.assert_array_equal(full.sum(axis=0), 2)
    # OD pair o -> d enters on input o and leaves on output d
    for o, d in itertools.product(range(4), range(4)):
        col = full[:, o * 4 + d]
        assert col[o] == 1 and col[4 + d] == 1
    assert np.linalg.matrix_rank(router.matrix) == 7


def test_router_small_cases():
    np.testing.assert_array_equal(build_router_routing(1, 1, drop_last_row=False).matrix, [[1], [1]])
    A = build_router_routing(2, 2, drop_last_row=True).matrix
    assert A.shape == (3, 4) and np.linalg.matrix_rank(A) == 3


def test_routing_matrix_invariants():
    with pytest.raises(ValueError):
        RoutingMatrix(np.array([[1, 2], [0, 1]]))
    with pytest.raises(ValueError):
        RoutingMatrix(np.array([[1, 0], [1, 0]]))
    with pytest.raises(ValueError):
        RoutingMatrix(np.array([[0, 0], [1, 1]]))


def test_validate(two_leaf, router):
    d = validate_routing(two_leaf)
    assert d.ok and d.rank == 2 and not d.warnings
    d = validate_routing(np.array([[1, 1, 0], [0, 0, 1]]))
    assert d.duplicate_columns == [(0, 1)]
    assert any("duplicate" in w for w in d.warnings)
    assert validate_routing(router).rank == 7
    assert not validate_routing(np.array([[1, 0], [0, 0]])).ok


def test_csv_roundtrip(tmp_path, router):
    p = tmp_path / "A.csv"
    write_routing_csv(router, p)
    np.testing.assert_array_equal(read_routing_csv(p).matrix, router.matrix)


def test_adjacency_file(tmp_path, two_leaf):
    p = tmp_path / "tree.txt"
    p.write_text("# child parent\nr -\na r\nb a\nc a\n")
    np.testing.assert_array_equal(load_tree_routing(p).matrix, two_leaf.matrix)
