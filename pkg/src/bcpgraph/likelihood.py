"""Log-space conditional densities for partitions, model flags and shrinkage weights."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _core
from .graph import Graph
from .partition import Dataset, Partition, boundary_length, within_between_ss

__all__ = [
    "ModelConfig",
    "SingularDesignError",
    "log_incomplete_beta",
    "zs_inverse_diag",
    "beta_hat",
    "w_tilde",
    "log_tau_prior",
    "log_rho_prior_graph",
    "log_rho_prior_path",
    "log_joint_rho_tau",
    "log_w_conditional",
    "validate_w",
]


class SingularDesignError(ArithmeticError):
    """A predictor column is constant within a block."""


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters.

    alpha      boundary penalty of the graph partition prior
    w_limits   upper limits (w_0', ..., w_k') of the uniform priors on w;
               a scalar is broadcast to every coordinate
    d          weight of the intercept-only model in the tau prior
    p0         upper limit of the path partition prior
    prior      "graph" (boundary-length prior) or "path"
    """

    alpha: float = 0.1
    w_limits: float | tuple = 0.2
    d: float = 10.0
    p0: float = 0.2
    k: int = 0
    prior: str = "graph"

    def __post_init__(self):
        if self.prior not in ("graph", "path"):
            raise ValueError("prior must be 'graph' or 'path'")
        if self.prior == "graph" and not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.p0 <= 1:
            raise ValueError("p0 must lie in (0, 1]")
        if self.d <= 0:
            raise ValueError("d must be positive")
        lim = self.w_lim
        if np.any(lim <= 0) or np.any(lim > 1):
            raise ValueError("w limits must lie in (0, 1]")

    @property
    def w_lim(self) -> np.ndarray:
        lim = np.atleast_1d(np.asarray(self.w_limits, dtype=float))
        if lim.size == 1:
            return np.full(self.k + 1, float(lim[0]))
        if lim.size != self.k + 1:
            raise ValueError(f"need {self.k + 1} w limits, got {lim.size}")
        return lim

    @property
    def w0_limit(self) -> float:
        return float(self.w_lim[0])

    def initial_w(self) -> np.ndarray:
        return self.w_lim / 2.0

    def replace(self, **kw) -> "ModelConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return ModelConfig(**d)


def validate_w(w, config: ModelConfig) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (config.k + 1,):
        raise ValueError(f"w must have {config.k + 1} entries")
    return w


def _in_box(w, config) -> bool:
    lim = config.w_lim
    return bool(np.all(w[1:] > 0) and np.all(w[1:] < lim[1:]))


def log_incomplete_beta(x: float, a: float, b: float) -> float:
    """log of  int_0^x t^(a-1) (1-t)^(b-1) dt  (not regularized)."""
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("shape parameters must be positive and finite")
    return float(_core.log_incbeta(float(x), float(a), float(b)))


def zs_inverse_diag(w, n_s: int, v_diag) -> np.ndarray:
    """Diagonal of Z_S: prior variance scales of (alpha_S, beta_S1..k) over sigma^2."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v_diag, dtype=float)
    if np.any(v <= 0):
        raise SingularDesignError("a predictor is constant within the block")
    return np.concatenate([[(1 - w[0]) / (n_s * w[0])], (1 - w[1:]) / (v * w[1:])])


def beta_hat(block, w) -> np.ndarray:
    """Posterior mean of the slopes of a full-model block given w."""
    k = block.sxy.shape[0]
    beta = np.empty(k)
    _, _, ok = _core.regression_terms(np.asarray(block.sxx, float),
                                      np.asarray(block.sxy, float),
                                      np.asarray(w, float), k, beta)
    if not ok:
        raise SingularDesignError("block design is singular")
    return beta


def _regression(part: Partition, slot: int, w):
    k = part.k
    beta = np.empty(k)
    c, ld, ok = _core.regression_terms(part.sxx[slot], part.sxy[slot], w, k, beta)
    if not ok:
        raise SingularDesignError(f"block {part.label[slot]} has a constant predictor")
    return c, ld


def _tau_of(part, slot, taus):
    if taus is None:
        return int(part.tau[slot])
    return int(taus[int(part.label[slot])])


def _regression_sums(part, w, taus):
    credit = 0.0
    logdet = 0.0
    for s in part.live_slots():
        if _tau_of(part, s, taus) == 1:
            c, ld = _regression(part, s, w)
            if ld < -1e-12:
                raise AssertionError("determinant term below 1")
            credit += c
            logdet += ld
    return credit, logdet


def w_tilde(partition: Partition, dataset: Dataset | None, w, taus=None) -> float:
    """W minus the regression credit of the full-model blocks, floored at 0."""
    W, _ = within_between_ss(partition, dataset)
    credit, _ = _regression_sums(partition, np.asarray(w, float), taus)
    wt = W - credit
    if wt < 0:
        warnings.warn(f"W-tilde {wt:.3e} below zero from cancellation; clamped", RuntimeWarning)
        wt = 0.0
    return wt


def log_tau_prior(tau: int, n_s: int, k: int, d: float) -> float:
    return float(_core.log_tau_prior(int(tau), int(n_s), int(k), float(d)))


def log_rho_prior_graph(partition: Partition, graph: Graph, alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    l = boundary_length(partition, graph)
    return l * math.log(alpha) if l else 0.0


def log_rho_prior_path(b: int, n: int, p0: float) -> float:
    if not 1 <= b <= n:
        raise ValueError("need 1 <= b <= n")
    return float(_core.log_path_prior(int(b), int(n), float(p0)))


def _data_term(partition, w, config, taus):
    ds = partition.dataset
    n = ds.n
    W, B = within_between_ss(partition)
    b = partition.block_count
    credit, logdet = _regression_sums(partition, w, taus)
    wt, _ = _core.clamp_wtilde(W - credit, ds.total_ss)
    bz = _core.b_is_zero(B, b, ds.total_ss)
    return float(_core.log_data_term(wt, B, b, n, 1, logdet, config.w0_limit, bz))


def log_joint_rho_tau(partition: Partition, dataset: Dataset | None, w, config: ModelConfig,
                      graph: Graph | None = None, taus=None) -> float:
    """Unnormalized log f(rho, tau | y, x, w).

    ``taus`` maps block label to tau and defaults to the partition's own flags.
    Partitions outside the support of the formula (too many blocks) give -inf.
    """
    w = np.asarray(w, float)
    tp = 0.0
    for s in partition.live_slots():
        tp += log_tau_prior(_tau_of(partition, s, taus), partition.cnt[s], partition.k, config.d)
    if tp == -math.inf:
        return -math.inf
    if config.prior == "graph":
        if graph is None:
            raise ValueError("graph prior needs the graph")
        lp = log_rho_prior_graph(partition, graph, config.alpha)
    else:
        lp = log_rho_prior_path(partition.block_count, partition.n, config.p0)
    return tp + lp + _data_term(partition, w, config, taus)


def log_w_conditional(w, partition: Partition, dataset: Dataset | None, config: ModelConfig,
                      taus=None) -> float:
    """Unnormalized log density of w given the partition and flags (-inf off the box)."""
    w = np.asarray(w, float)
    if config.k and not _in_box(w, config):
        return -math.inf
    return _data_term(partition, w, config, taus)
