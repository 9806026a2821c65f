import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcpgraph.graph import (ConnectivityError, InvalidEdgeError, InvalidSizeError, GraphError,
                            build_grid_graph, build_mst_graph, build_path_graph, load_edge_list,
                            total_edge_length, is_path)


def bfs_count(g):
    seen, todo = {0}, [0]
    while todo:
        v = todo.pop()
        for u in g.neighbors(v):
            if int(u) not in seen:
                seen.add(int(u))
                todo.append(int(u))
    return len(seen)


def test_path_examples():
    assert build_path_graph(1).edge_count == 0
    assert {tuple(e) for e in build_path_graph(3).edges} == {(0, 1), (1, 2)}
    g = build_path_graph(100)
    assert g.edge_count == 99
    assert all(g.degree(i) == 2 for i in range(1, 99))
    with pytest.raises(InvalidSizeError):
        build_path_graph(0)


def test_grid_examples():
    assert build_grid_graph(2, 2, "four").edge_count == 4
    assert build_grid_graph(2, 2, "eight").edge_count == 6
    assert build_grid_graph(20, 20, "four").edge_count == 760
    with pytest.raises(InvalidSizeError):
        build_grid_graph(0, 3)
    with pytest.raises(GraphError):
        build_grid_graph(2, 2, "six")


def test_grid_ids_and_kinds():
    g = build_grid_graph(3, 4, "eight")
    assert g.kind == "grid8" and g.shape == (3, 4)
    # node 5 = (1, 1) touches all 8 surrounding cells
    assert set(g.neighbors(5).tolist()) == {0, 1, 2, 4, 6, 8, 9, 10}


@pytest.mark.parametrize("r,c", [(1, 1), (1, 5), (3, 3), (4, 7)])
def test_grid8_superset_of_grid4(r, c):
    e4 = {tuple(e) for e in build_grid_graph(r, c, "four").edges}
    e8 = {tuple(e) for e in build_grid_graph(r, c, "eight").edges}
    assert e4 <= e8


def test_graph_invariants_undirected_no_loops():
    for g in (build_path_graph(7), build_grid_graph(4, 5, "eight"),
              build_mst_graph(np.random.default_rng(0).random((9, 2)))):
        adj = g.adjacency
        for i, nb in enumerate(adj):
            assert i not in nb
            assert len(set(nb)) == len(nb)
            for j in nb:
                assert i in adj[j]
        assert bfs_count(g) == g.node_count


def test_mst_examples():
    g = build_mst_graph([(0, 0), (1, 0), (2, 0)])
    assert {tuple(e) for e in g.edges} == {(0, 1), (1, 2)}
    pts = [(0, 0), (0, 1), (1, 0), (5, 5)]
    g = build_mst_graph(pts)
    assert g.edge_count == 3
    # (5, 5) is sqrt(41) from both (0, 1) and (1, 0), closer than sqrt(50) from the origin
    assert math.isclose(total_edge_length(g, pts), brute_force_mst(pts))
    assert math.isclose(total_edge_length(g, pts), 2 + math.sqrt(41))
    assert build_mst_graph([(0, 0)]).edge_count == 0
    with pytest.raises(GraphError):
        build_mst_graph([(0, 0), (np.nan, 1)])


def test_mst_duplicate_coordinates_allowed():
    g = build_mst_graph([(0, 0), (0, 0), (1, 1)])
    assert g.edge_count == 2


def test_mst_tie_break_is_lexicographic():
    # unit square: every side has length 1; Prim from 0 takes (0,1), then (0,2), then (1,3)
    g = build_mst_graph([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert {tuple(e) for e in g.edges} == {(0, 1), (0, 2), (1, 3)}


def brute_force_mst(pts):
    n = len(pts)
    pairs = list(itertools.combinations(range(n), 2))
    best = math.inf
    for sub in itertools.combinations(pairs, n - 1):
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        ok = True
        for a, b in sub:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            best = min(best, sum(math.dist(pts[a], pts[b]) for a, b in sub))
    return best


@pytest.mark.parametrize("seed", range(8))
def test_mst_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    pts = rng.random((n, 2))
    g = build_mst_graph(pts)
    assert g.edge_count == n - 1
    assert bfs_count(g) == n
    assert math.isclose(total_edge_length(g, pts), brute_force_mst(pts), rel_tol=1e-12)


def test_edge_list_examples():
    assert load_edge_list(3, [(0, 1), (1, 2), (1, 0)]).edge_count == 2
    with pytest.raises(ConnectivityError):
        load_edge_list(3, [(0, 1)])
    with pytest.raises(InvalidEdgeError):
        load_edge_list(2, [(0, 0)])
    with pytest.raises(InvalidEdgeError):
        load_edge_list(2, [(0, 5)])


def test_is_path():
    assert is_path(build_path_graph(5))
    assert is_path(build_grid_graph(1, 5))
    assert not is_path(build_grid_graph(2, 2))
    assert not is_path(load_edge_list(3, [(0, 2), (2, 1)]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from(["four", "eight"]))
def test_grids_connected(r, c, nb):
    g = build_grid_graph(r, c, nb)
    assert bfs_count(g) == r * c
