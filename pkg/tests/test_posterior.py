import math

import numpy as np
import pytest
from scipy import integrate

from bcpgraph.graph import build_grid_graph, build_path_graph
from bcpgraph.likelihood import ModelConfig
from bcpgraph.posterior import StepEstimate, aggregate, evaluate_mse, step_expectations, w0_star
from bcpgraph.partition import Dataset
from bcpgraph.sampler import McmcState


def quad_w0_mean(B, Wt, b, n, w0p):
    f = lambda w: w ** ((b - 1) / 2) * (Wt + w * B) ** (-(n - 1) / 2)
    num, _ = integrate.quad(lambda w: w * f(w), 0, w0p, epsabs=0, epsrel=1e-12)
    den, _ = integrate.quad(f, 0, w0p, epsabs=0, epsrel=1e-12)
    return num / den


def test_w0_star_examples():
    assert w0_star(0.0, 10.0, 1, 20, 0.2) == pytest.approx(0.1)
    assert w0_star(5.0, 10.0, 1, 20, 0.2) == pytest.approx(0.1)
    ref = quad_w0_mean(5.0, 40.0, 3, 50, 0.2)
    assert w0_star(5.0, 40.0, 3, 50, 0.2) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("B,Wt,b,n", [(0.5, 3.0, 2, 6), (200.0, 1.0, 5, 40), (1e-3, 50.0, 2, 300),
                                      (3.0, 3.0, 4, 8)])
def test_w0_star_in_range_and_matches_quadrature(B, Wt, b, n):
    got = w0_star(B, Wt, b, n, 0.2)
    assert 0 < got < 0.2
    assert got == pytest.approx(quad_w0_mean(B, Wt, b, n, 0.2), rel=1e-6)


def _state(y, membership, x=None, graph=None):
    ds = Dataset(y, x)
    graph = graph or build_path_graph(ds.n)
    return McmcState(ds, graph, ModelConfig(k=ds.k), seed=0, membership=membership)


def test_step_single_block():
    y = np.array([1.0, 4.0, 2.0, 7.0, 3.0])
    est = step_expectations(_state(y, np.zeros(5)))
    np.testing.assert_allclose(est.fitted, y.mean())
    assert est.b == 1
    assert est.sigma2 == pytest.approx(((y - y.mean()) ** 2).sum() / 2)


def test_step_two_blocks_shrinks_toward_block_means():
    y = np.array([0.0, 0.2, -0.1, 0.1, 0.0, 5.0, 5.2, 4.9, 5.1, 4.8])
    memb = np.repeat([0, 1], 5)
    est = step_expectations(_state(y, memb))
    means = np.repeat([y[:5].mean(), y[5:].mean()], 5)
    # fitted = (1 - w0*) block mean + w0* grand mean, with w0* small here
    expect = (1 - est.w0_star) * means + est.w0_star * y.mean()
    np.testing.assert_allclose(est.fitted, expect, atol=1e-12)
    assert est.w0_star < 0.01
    np.testing.assert_allclose(est.fitted, means, atol=0.05)
    assert est.boundary_edges.sum() == 1


def test_step_regression_block_follows_ols():
    x = np.linspace(-1, 1, 12)
    y = 0.5 + 2.0 * x
    ds = Dataset(y, x)
    state = McmcState(ds, build_path_graph(12), ModelConfig(k=1), seed=0,
                      membership=np.zeros(12), w=[0.1, 1e-9])
    state.partition.tau[state.partition.slot_of(0)] = 1
    state.refresh()
    est = step_expectations(state)
    np.testing.assert_allclose(est.fitted, y, atol=1e-4)


def test_step_sigma_missing_for_tiny_n():
    est = step_expectations(_state(np.array([1.0, 2.0, 4.0]), np.zeros(3)))
    assert math.isnan(est.sigma2)
    np.testing.assert_allclose(est.fitted, 7 / 3)


def _est(fitted, edges, b=1):
    fitted = np.asarray(fitted, float)
    return StepEstimate(fitted, 1.0, b, np.asarray(edges, bool), np.asarray(edges + [False], bool))


def test_aggregate_examples():
    one = aggregate([_est([1, 2, 3], [False, True])])
    assert np.all(one.posterior_var == 0)
    rep = aggregate([_est([1, 2, 3], [False, True])] * 4)
    np.testing.assert_array_equal(rep.posterior_mean, [1, 2, 3])
    assert np.all(rep.posterior_var == 0)
    alt = aggregate([_est([0, 0], [True]), _est([0, 0], [False])] * 3, build_path_graph(2))
    assert alt.edge_change_prob[0] == 0.5
    assert alt.cp_prob[0] == 1.0 and alt.cp_prob[1] == 0.5
    grid = aggregate([_est([0, 0, 0, 0], [True, False, True, False])], build_grid_graph(2, 2))
    assert grid.cp_prob is None
    with pytest.raises(ValueError):
        aggregate([])


def test_evaluate_mse():
    a = np.arange(5.0)
    assert evaluate_mse(a, a) == 0.0
    assert evaluate_mse(a + 1, a) == 1.0
    truth = np.repeat([0.0, 1.0], 200)
    assert evaluate_mse(np.full(400, 0.5), truth) == 0.25
    with pytest.raises(ValueError):
        evaluate_mse(a, a[:3])
