"""MCMC over partitions, model flags and shrinkage weights on a graph."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _core
from . import _kernels as K
from .graph import Graph, is_path
from .likelihood import ModelConfig
from .partition import Dataset, Partition
from .posterior import StepEstimate, step_expectations

__all__ = [
    "McmcState",
    "SamplerSchedule",
    "ChainOutput",
    "JitterRecord",
    "full_pixel_pass",
    "active_pixel_pass",
    "block_merge_pass",
    "w_pass",
    "regularize_design",
    "run_chain",
    "initial_membership",
]

RECOMPUTE_EVERY = 10_000
INITS = ("median", "single")


def initial_membership(dataset: Dataset, init: str = "median") -> np.ndarray:
    """Starting partition.

    "median" puts nodes above the median response in a second block (one block
    if that would leave too few nodes for the two-block likelihood); "single"
    starts from one block.  Chains started from one block rarely leave it
    when alpha is small, because every intermediate state on the way to a
    large second block carries a long boundary.
    """
    n = dataset.n
    y = dataset.y if dataset.y.ndim == 1 else dataset.y[:, 0]
    if init == "single" or n < 5:
        return np.zeros(n, dtype=np.int64)
    if init != "median":
        raise ValueError(f"init must be one of {INITS}")
    memb = (y > np.median(y)).astype(np.int64)
    if memb.min() == memb.max():
        return np.zeros(n, dtype=np.int64)
    return memb


def connected_pieces(membership, graph: Graph) -> np.ndarray:
    """Split every block into its connected components, labelled densely."""
    memb = np.asarray(membership)
    out = np.full(len(memb), -1, dtype=np.int64)
    nxt = 0
    for v in range(len(memb)):
        if out[v] >= 0:
            continue
        out[v] = nxt
        stack = [v]
        while stack:
            u = stack.pop()
            for t in graph.indices[graph.indptr[u]:graph.indptr[u + 1]]:
                if out[t] < 0 and memb[t] == memb[u]:
                    out[t] = nxt
                    stack.append(t)
        nxt += 1
    return out


@dataclass
class SamplerSchedule:
    """Burn-in FPPs, then ``steps`` steps of the pass mix; the first ``discard``
    steps are dropped from the posterior as well."""

    steps: int = 2000
    discard: int = 1000
    burn_in_fpp: int = 100
    n_fpp: int = 1
    n_app: int = 20
    n_merge: int = 1
    n_w: int = 1
    pseudo_app_fraction: float = 1.0
    random_order: bool = False
    app_island_new_block: bool = False
    app_snapshot: bool = False
    keep_memberships_every: int = 10
    init: str = "median"

    def __post_init__(self):
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if not 0.0 <= self.pseudo_app_fraction <= 1.0:
            raise ValueError("pseudo_app_fraction must lie in [0, 1]")
        if min(self.steps, self.discard, self.burn_in_fpp) < 0:
            raise ValueError("step counts must be nonnegative")


class McmcState:
    """Partition, flags (stored per block in the partition), w and a seeded stream."""

    def __init__(self, dataset: Dataset, graph: Graph, config: ModelConfig, seed=None,
                 membership=None, w=None):
        if graph.node_count != dataset.n:
            raise ValueError("graph and dataset sizes differ")
        if config.k != dataset.k:
            config = config.replace(k=dataset.k)
        self.dataset = dataset
        self.graph = graph
        self.config = config
        if config.prior == "path":
            # the path prior counts segments, so every block must stay one
            if not is_path(graph):
                raise ValueError("the path prior needs a path graph")
            if membership is not None:
                membership = connected_pieces(membership, graph)
        self.partition = Partition(dataset, membership)
        self.w = (config.initial_w() if w is None else np.asarray(w, float)).copy()
        self.wlim = config.w_lim.copy()
        self.rng = np.random.default_rng(seed)
        self.step_index = 0
        self.params = np.array([
            config.alpha, config.w0_limit, config.d, config.p0,
            float(dataset.y_bar), dataset.total_ss,
            _core.PRIOR_GRAPH if config.prior == "graph" else _core.PRIOR_PATH,
        ])
        self.cand_stats = np.zeros(3, dtype=np.int64)
        self.refresh()

    @property
    def data(self):
        return self.partition.data_arrays(self.graph)

    @property
    def taus(self) -> dict[int, int]:
        return self.partition.taus()

    @property
    def counters(self) -> dict:
        ints = self.partition.ints
        return {
            "jitter_count": int(ints[K.JITTER]),
            "wtilde_clamp_count": int(ints[K.CLAMP]),
            "w_accepted": int(ints[K.WACC]),
            "w_proposed": int(ints[K.WPROP]),
        }

    def refresh(self) -> None:
        """Recompute boundary length and cached regression terms."""
        part = self.partition
        part.ints[K.LTOT] = K.boundary_length_arr(part.member, part.n, self.graph.indptr,
                                                  self.graph.indices, part.stamp, part.ints)
        K.refresh_regression(part.arrays, self.data, self.w, part.k)

    def maybe_recompute(self) -> None:
        if self.partition.ints[K.MOVES] >= RECOMPUTE_EVERY:
            K.recompute_stats(self.partition.arrays, self.data, self.partition.k)
            K.refresh_regression(self.partition.arrays, self.data, self.w, self.partition.k)

    def log_posterior(self) -> float:
        return float(K.current_log_post(self.partition.arrays, self.data, self.params,
                                        self.partition.k))

    def next_seed(self) -> int:
        return int(self.rng.integers(0, 2**31 - 1))


def _order(state, random_order):
    n = state.partition.n
    return state.rng.permutation(n) if random_order else np.arange(n)


def full_pixel_pass(state: McmcState, dataset=None, graph=None, config=None,
                    random_order=False) -> McmcState:
    K.node_pass(state.partition.arrays, state.data, state.params, state.w, state.partition.k,
                _order(state, random_order), 0, False, False, state.next_seed(),
                state.cand_stats)
    state.maybe_recompute()
    return state


def active_pixel_pass(state: McmcState, dataset=None, graph=None, config=None,
                      pseudo: bool = True, island_new_block: bool = False,
                      random_order=False, snapshot=False) -> McmcState:
    """Gibbs moves for boundary nodes.

    Activity is checked when a node is visited.  With ``snapshot`` only nodes
    active at the start of the pass are candidates for a visit, which makes the
    pass depend on its starting state and biases the chain slightly.
    """
    part = state.partition
    if snapshot:
        active, _ = K.active_nodes_arr(part.member, state.graph.indptr, state.graph.indices)
        order = np.flatnonzero(active)
    else:
        order = np.arange(part.n)
    if random_order:
        order = state.rng.permutation(order)
    if len(order):
        K.node_pass(part.arrays, state.data, state.params, state.w, part.k, order, 1,
                    bool(pseudo), bool(island_new_block), state.next_seed(), state.cand_stats)
        state.maybe_recompute()
    return state


def block_merge_pass(state: McmcState, dataset=None, graph=None, config=None) -> McmcState:
    if state.partition.block_count > 1:
        K.merge_pass(state.partition.arrays, state.data, state.params, state.w,
                     state.partition.k, state.next_seed())
        state.maybe_recompute()
    return state


def w_pass(state: McmcState, dataset=None, config=None) -> McmcState:
    if state.partition.k > 0:
        K.w_pass(state.partition.arrays, state.data, state.params, state.w, state.wlim,
                 state.partition.k, state.next_seed())
    return state


_jitter_ids = iter(range(1, 1 << 62))


@dataclass
class JitterRecord:
    """Perturbed copy of one block's design, valid for a single evaluation."""

    record_id: int
    rows: np.ndarray
    columns: np.ndarray
    x: np.ndarray
    epsilon: np.ndarray


def regularize_design(rows, dataset: Dataset, rng: np.random.Generator) -> JitterRecord:
    """Add uniform(-eps, eps) noise to predictor columns that are constant over ``rows``.

    eps is 1e-6 times max(1, range of the column over the whole dataset).
    The dataset itself is not modified.
    """
    rows = np.asarray(rows, dtype=np.int64)
    xb = dataset.x[rows].copy()
    const = np.flatnonzero(np.ptp(xb, axis=0) == 0) if dataset.k else np.zeros(0, int)
    eps = _core.JITTER_REL * np.maximum(1.0, dataset.x_range[const])
    if len(const):
        xb[:, const] += rng.uniform(-eps, eps, size=(len(rows), len(const)))
    return JitterRecord(next(_jitter_ids), rows, const, xb, eps)


@dataclass
class ChainOutput:
    steps: list[StepEstimate]
    block_trace: np.ndarray
    w_trace: np.ndarray
    log_post_trace: np.ndarray
    memberships: list[np.ndarray] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    runtime: float = 0.0
    state: McmcState | None = None


def run_step(state: McmcState, schedule: SamplerSchedule) -> None:
    n_pseudo = int(round(schedule.pseudo_app_fraction * schedule.n_app))
    for _ in range(schedule.n_fpp):
        full_pixel_pass(state, random_order=schedule.random_order)
    for a in range(schedule.n_app):
        active_pixel_pass(state, pseudo=a < n_pseudo,
                          island_new_block=schedule.app_island_new_block,
                          random_order=schedule.random_order, snapshot=schedule.app_snapshot)
    for _ in range(schedule.n_merge):
        block_merge_pass(state)
    for _ in range(schedule.n_w):
        w_pass(state)
    state.step_index += 1


def run_chain(dataset: Dataset, graph: Graph, config: ModelConfig,
              schedule: SamplerSchedule | None = None, seed=None, state=None) -> ChainOutput:
    """Burn-in FPPs, then the scheduled steps; retained steps record conditional means."""
    schedule = schedule or SamplerSchedule()
    t0 = time.perf_counter()
    if state is None:
        state = McmcState(dataset, graph, config, seed,
                          membership=initial_membership(dataset, schedule.init))
        if not np.isfinite(state.log_posterior()):
            # e.g. a noisy median split cut into more segments than the data support
            state = McmcState(dataset, graph, config, seed,
                              membership=np.zeros(dataset.n, dtype=np.int64))
    for _ in range(schedule.burn_in_fpp):
        full_pixel_pass(state, random_order=schedule.random_order)
    steps, btrace, wtrace, lptrace, snaps = [], [], [], [], []
    for t in range(schedule.steps):
        run_step(state, schedule)
        btrace.append(state.partition.block_count)
        wtrace.append(state.w.copy())
        lptrace.append(state.log_posterior())
        if t >= schedule.discard:
            est = step_expectations(state)
            r = t - schedule.discard
            if schedule.keep_memberships_every and r % schedule.keep_memberships_every == 0:
                est.membership = state.partition.canonical_membership()
                snaps.append(est.membership)
            steps.append(est)
    return ChainOutput(
        steps=steps,
        block_trace=np.asarray(btrace, dtype=np.int64),
        w_trace=np.asarray(wtrace).reshape(len(wtrace), len(state.w)),
        log_post_trace=np.asarray(lptrace),
        memberships=snaps,
        counters=state.counters | {"max_candidates": int(state.cand_stats[0])},
        runtime=time.perf_counter() - t0,
        state=state,
    )
