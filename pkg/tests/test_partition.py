import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcpgraph.graph import build_grid_graph, build_path_graph, load_edge_list
from bcpgraph.partition import (NEW_BLOCK, Dataset, Partition, PartitionError, active_nodes,
                                boundary_length, within_between_ss)


def brute_stats(ds, membership):
    """Per-block (n, mean, within SS, centered sxx, centered sxy) from scratch."""
    out = {}
    for lab in np.unique(membership):
        idx = membership == lab
        y = ds.y[idx]
        x = ds.x[idx]
        xc = x - x.mean(axis=0)
        out[lab] = (idx.sum(), y.mean(), ((y - y.mean()) ** 2).sum(), xc.T @ xc,
                    xc.T @ (y - y.mean()))
    return out


def brute_boundary(membership, graph):
    total = 0
    for lab in np.unique(membership):
        inside = set(np.flatnonzero(membership == lab))
        nbrs = set()
        for a, b in graph.edges:
            if a in inside and b not in inside:
                nbrs.add(b)
            if b in inside and a not in inside:
                nbrs.add(a)
        total += len(nbrs)
    return total


def assert_matches(part, tol=1e-9):
    ref = brute_stats(part.dataset, part.membership)
    assert set(ref) == set(part.labels)
    for lab, (n_s, ybar, yss, sxx, sxy) in ref.items():
        blk = part.block(lab)
        assert blk.n_s == n_s
        assert blk.y_mean == pytest.approx(ybar, abs=tol)
        assert blk.within_ss == pytest.approx(yss, abs=tol)
        np.testing.assert_allclose(blk.sxx, sxx, atol=tol)
        np.testing.assert_allclose(blk.sxy, sxy, atol=tol)


def test_boundary_examples():
    ds = Dataset(np.zeros(4))
    g = build_path_graph(4)
    assert boundary_length(Partition(ds), g) == 0
    assert boundary_length(Partition(ds, [0, 0, 1, 1]), g) == 2
    g2 = build_grid_graph(2, 2, "four")
    assert boundary_length(Partition(ds, [0, 0, 1, 1]), g2) == 4


def test_boundary_grid8_half_split():
    g = build_grid_graph(20, 20, "eight")
    memb = np.repeat([0, 1], 200)
    ds = Dataset(np.zeros(400))
    # each block sees the adjacent row of the other
    assert boundary_length(Partition(ds, memb), g) == 40
    assert boundary_length(Partition(ds, memb), g) == brute_boundary(memb, g)


def test_boundary_relabel_invariance():
    rng = np.random.default_rng(3)
    g = build_grid_graph(4, 5, "eight")
    ds = Dataset(rng.normal(size=20))
    memb = rng.integers(0, 4, size=20)
    perm = np.array([7, 2, 11, 5])
    assert boundary_length(Partition(ds, memb), g) == boundary_length(Partition(ds, perm[memb]), g)
    assert boundary_length(Partition(ds, memb), g) == brute_boundary(memb, g)


def test_move_noop_and_split():
    ds = Dataset([1.0, 2.0])
    part = Partition(ds, [0, 1])
    before = part.membership.copy()
    part.move_node(1, NEW_BLOCK)
    assert part.block_count == 2
    assert np.array_equal(part.canonical_membership(), [0, 1])
    assert set(before) == {0, 1}

    part = Partition(ds)
    part.move_node(1, NEW_BLOCK)
    assert part.block_count == 2
    assert [b.n_s for b in part.blocks.values()] == [1, 1]


def test_random_moves_match_recompute():
    rng = np.random.default_rng(11)
    edges = [(i, i + 1) for i in range(7)] + [(0, 4), (2, 6), (1, 7)]
    g = load_edge_list(8, edges)
    ds = Dataset(rng.normal(size=8), rng.normal(size=(8, 2)))
    part = Partition(ds, rng.integers(0, 3, size=8))
    for _ in range(50):
        node = int(rng.integers(8))
        labels = part.labels + [NEW_BLOCK]
        part.move_node(node, labels[rng.integers(len(labels))])
    assert_matches(part)
    fresh = Partition(ds, part.membership)
    assert boundary_length(part, g) == boundary_length(fresh, g)


def test_merge_examples():
    part = Partition(Dataset([1.0, 3.0]), [0, 1])
    part.merge_blocks(0, 1)
    (blk,) = part.blocks.values()
    assert (blk.n_s, blk.y_mean, blk.within_ss) == (2, 2.0, 2.0)

    part = Partition(Dataset([0.0, 1.0, 0.5, 2.0], [0.0, 1.0, 2.0, 3.0]), [0, 0, 1, 1])
    part.merge_blocks(0, 1)
    (blk,) = part.blocks.values()
    assert blk.sxx[0, 0] == pytest.approx(5.0, abs=1e-12)

    with pytest.raises(PartitionError):
        Partition(Dataset([1.0, 2.0]), [0, 1]).merge_blocks(0, 0)


def test_merge_and_move_undo():
    rng = np.random.default_rng(5)
    ds = Dataset(rng.normal(size=9), rng.normal(size=(9, 1)))
    part = Partition(ds, rng.integers(0, 3, size=9))
    ref = part.copy()
    rec = part.merge_blocks(part.labels[0], part.labels[1])
    part.undo(rec)
    rec = part.move_node(4, NEW_BLOCK)
    part.undo(rec)
    assert np.array_equal(part.membership, ref.membership)
    for lab in ref.labels:
        a, b = part.block(lab), ref.block(lab)
        assert a.n_s == b.n_s
        assert abs(a.y_mean - b.y_mean) < 1e-12
        assert abs(a.within_ss - b.within_ss) < 1e-12
        np.testing.assert_allclose(a.sxx, b.sxx, atol=1e-12)


def test_within_between_examples():
    ds = Dataset([0.0, 0.0, 1.0, 1.0])
    assert within_between_ss(Partition(ds)) == pytest.approx((1.0, 0.0))
    assert within_between_ss(Partition(ds, [0, 0, 1, 1])) == pytest.approx((0.0, 1.0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_within_plus_between(seed, nb):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.normal(scale=rng.uniform(0.1, 50), size=10))
    W, B = within_between_ss(Partition(ds, rng.integers(0, nb, size=10)))
    assert W + B == pytest.approx(ds.total_ss, rel=1e-10, abs=1e-12)


def test_active_examples():
    g = build_path_graph(3)
    idx, _ = active_nodes(Partition(Dataset(np.zeros(3))), g)
    assert len(idx) == 0
    idx, island = active_nodes(Partition(Dataset(np.zeros(3)), [0, 1, 0]), g)
    assert list(idx) == [0, 1, 2]
    # every neighbor of each end node lies in the other block too
    assert list(island) == [True, True, True]

    g = build_grid_graph(3, 3, "four")
    memb = np.zeros(9, int)
    memb[4] = 1
    idx, island = active_nodes(Partition(Dataset(np.zeros(9)), memb), g)
    assert list(idx) == [1, 3, 4, 5, 7]
    assert dict(zip(idx, island))[4]
    assert sum(island) == 1


def test_taus_constraint_on_shrink():
    ds = Dataset(np.arange(6.0), np.arange(6.0) ** 2)
    part = Partition(ds, [0, 0, 1, 1, 1, 1], taus={0: 1, 1: 1})
    part.move_node(0, 1)
    assert part.taus()[0] == 0
    part.check_taus()
    with pytest.raises(PartitionError):
        Partition(ds, [0, 1, 1, 1, 1, 1], taus={0: 1, 1: 0})


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset([1.0, np.nan])
    with pytest.raises(ValueError):
        Dataset([1.0, 2.0], np.zeros((3, 1)))
    with pytest.raises(PartitionError):
        Partition(Dataset(np.zeros((3, 2))))
