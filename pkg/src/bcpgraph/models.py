"""Front ends: classical and multivariate sequences, and regression on graphs."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _path
from .graph import Graph, build_path_graph, is_path
from .likelihood import ModelConfig
from .partition import Dataset
from .posterior import GL_NODES, GL_WEIGHTS, PosteriorSummary, aggregate
from .sampler import SamplerSchedule, run_chain

__all__ = [
    "ProblemSpec",
    "PathChain",
    "fit_classical_path",
    "fit_multivariate_path",
    "fit_graph_regression",
    "modal_partition",
    "run_path_chain",
]

MODES = ("path", "multivariate", "graph")


@dataclass(frozen=True)
class ProblemSpec:
    mode: str
    graph: Graph
    dataset: Dataset
    config: ModelConfig

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode in ("path", "multivariate") and not is_path(self.graph):
            raise ValueError(f"{self.mode} mode needs a path graph")
        if self.mode == "path" and self.dataset.m != 1:
            raise ValueError("path mode takes a single response column")
        if self.graph.node_count != self.dataset.n:
            raise ValueError("graph and dataset sizes differ")


@dataclass
class PathChain:
    """Raw accumulators of a sequence chain."""

    mean: np.ndarray
    m2: np.ndarray
    cp: np.ndarray
    act: np.ndarray
    kept: int
    b_sum: float
    sigma2_sum: float
    sigma2_count: int
    codes: np.ndarray
    breaks: np.ndarray
    runtime: float


def _seed_int(seed) -> int:
    return int(np.random.default_rng(seed).integers(0, 2**31 - 1))


def run_path_chain(Y, config: ModelConfig, schedule: SamplerSchedule | None = None,
                   seed=None, keep_codes: bool = False) -> PathChain:
    """Sweep chain over contiguous partitions of the rows of ``Y`` (n, m)."""
    schedule = schedule or SamplerSchedule()
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, m = Y.shape
    if n < 1 or m < 1:
        raise ValueError("need at least one row and one column")
    if not np.all(np.isfinite(Y)):
        raise ValueError("responses must be finite")
    if keep_codes and n > 63:
        raise ValueError("partition codes need n <= 63")
    Yc = np.ascontiguousarray(Y - Y.mean(axis=0))
    tss = float((Yc ** 2).sum())
    kept_max = max(schedule.steps - schedule.discard, 0)
    codes = np.zeros(kept_max if keep_codes else 0, dtype=np.int64)
    mean = np.zeros((n, m))
    m2 = np.zeros((n, m))
    cp = np.zeros(n, dtype=np.int64)
    act = np.zeros(n, dtype=np.int64)
    stats = np.zeros(3)
    brk = np.zeros(n, dtype=np.int8)
    t0 = time.perf_counter()
    kept = _path.path_chain(Yc, tss, config.w0_limit, config.p0, int(schedule.steps),
                            int(schedule.discard), _seed_int(seed), brk, GL_NODES, GL_WEIGHTS,
                            codes, mean, m2, cp, act, stats)
    runtime = time.perf_counter() - t0
    mean += Y.mean(axis=0)
    return PathChain(mean, m2, cp, act, int(kept), stats[0], stats[1], int(stats[2]),
                     codes[:kept], brk, runtime)


def _codes_to_membership(code: int, n: int) -> np.ndarray:
    starts = np.array([(code >> (i - 1)) & 1 for i in range(1, n)], dtype=np.int64)
    return np.concatenate([[0], np.cumsum(starts)])


def _path_summary(ch: PathChain, univariate: bool, thin: int) -> PosteriorSummary:
    if ch.kept == 0:
        raise ValueError("no retained steps to aggregate")
    n = ch.mean.shape[0]
    mean, var = ch.mean, (ch.m2 / (ch.kept - 1) if ch.kept > 1 else np.zeros_like(ch.m2))
    if univariate:
        mean, var = mean[:, 0], var[:, 0]
    cp = ch.cp / ch.kept
    cp[0] = 1.0
    modal = None
    if len(ch.codes):
        modal = _codes_to_membership(int(modal_partition(ch.codes[::thin])), n)
    return PosteriorSummary(
        posterior_mean=mean,
        posterior_var=var,
        edge_change_prob=cp[1:].copy(),
        node_boundary_prob=ch.act / ch.kept,
        mean_blocks=ch.b_sum / ch.kept,
        n_steps=ch.kept,
        cp_prob=cp,
        sigma2_mean=ch.sigma2_sum / ch.sigma2_count if ch.sigma2_count else float("nan"),
        runtime=ch.runtime,
        modal_partition=modal,
    )


def fit_classical_path(y, config: ModelConfig | None = None, seed=None,
                       schedule: SamplerSchedule | None = None) -> PosteriorSummary:
    """Change points in a scalar sequence under the path prior.

    Only ``steps`` and ``discard`` of the schedule are used: one step is a
    sweep over positions 2..n.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("y must be one-dimensional; use fit_multivariate_path for matrices")
    config = (config or ModelConfig()).replace(prior="path", k=0)
    schedule = schedule or SamplerSchedule()
    ch = run_path_chain(y, config, schedule, seed, keep_codes=len(y) <= 63)
    return _path_summary(ch, True, max(schedule.keep_memberships_every, 1))


def fit_multivariate_path(Y, config: ModelConfig | None = None, seed=None,
                          schedule: SamplerSchedule | None = None) -> PosteriorSummary:
    """Change points shared by every column of ``Y`` (n, m); no slopes, no tau."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    config = (config or ModelConfig()).replace(prior="path", k=0)
    schedule = schedule or SamplerSchedule()
    ch = run_path_chain(Y, config, schedule, seed, keep_codes=Y.shape[0] <= 63)
    return _path_summary(ch, False, max(schedule.keep_memberships_every, 1))


def modal_partition(snapshots):
    """Most frequent entry of ``snapshots``; ties go to the earliest first occurrence.

    Entries may be integer codes or membership arrays.
    """
    if len(snapshots) == 0:
        return None
    keys = [s.tobytes() if isinstance(s, np.ndarray) else s for s in snapshots]
    count: dict = {}
    first: dict = {}
    for i, key in enumerate(keys):
        count[key] = count.get(key, 0) + 1
        first.setdefault(key, i)
    best = max(count, key=lambda q: (count[q], -first[q]))
    return snapshots[first[best]]


def fit_graph_regression(graph: Graph, X, y, config: ModelConfig | None = None, seed=None,
                         schedule: SamplerSchedule | None = None) -> PosteriorSummary:
    """Full sampler: per-block means or regressions with the boundary-length prior.

    ``X`` may be None or an (n, 0) array for intercept-only blocks.
    """
    y = np.asarray(y, dtype=float)
    if X is not None:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
    ds = Dataset(y, X)
    config = (config or ModelConfig()).replace(k=ds.k)
    schedule = schedule or SamplerSchedule()
    out = run_chain(ds, graph, config, schedule, seed)
    summary = aggregate(out.steps, graph)
    summary.runtime = out.runtime
    summary.modal_partition = modal_partition(out.memberships)
    if summary.modal_partition is not None:
        summary.modal_partition = np.asarray(summary.modal_partition)
    summary.extra = dict(out.counters)
    summary.extra["w_final"] = out.state.w.tolist()
    return summary


def default_graph(mode: str, n: int) -> Graph:
    if mode in ("path", "multivariate"):
        return build_path_graph(n)
    raise ValueError("graph mode needs an explicit graph")
