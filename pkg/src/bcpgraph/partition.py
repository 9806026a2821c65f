"""Partitions of graph nodes into blocks with cached sufficient statistics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .graph import Graph

NEW_BLOCK = -2


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Responses ``y`` and predictor rows ``x`` at each node.

    ``y`` may be two-dimensional (n, m) for the multivariate reduction;
    the graph samplers require m == 1.
    """

    y: np.ndarray
    x: np.ndarray = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim not in (1, 2) or y.shape[0] < 1:
            raise ValueError("y must be a non-empty vector or (n, m) matrix")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        x = self.x
        if x is None:
            x = np.zeros((y.shape[0], 0))
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != y.shape[0]:
            raise ValueError("x and y have different numbers of rows")
        if not np.all(np.isfinite(x)):
            raise ValueError("predictors must be finite")
        y = np.ascontiguousarray(y)
        x = np.ascontiguousarray(x)
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return 1 if self.y.ndim == 1 else self.y.shape[1]

    @property
    def y_bar(self):
        return self.y.mean(axis=0)

    @property
    def total_ss(self) -> float:
        return float(((self.y - self.y_bar) ** 2).sum())

    @property
    def x_range(self) -> np.ndarray:
        if self.k == 0:
            return np.zeros(0)
        return self.x.max(axis=0) - self.x.min(axis=0)


@dataclass
class BlockStats:
    """Snapshot of one block.  ``sxx``/``sxy`` are centered about the block means."""

    label: int
    members: np.ndarray
    n_s: int
    y_mean: float
    within_ss: float
    x_mean: np.ndarray
    sxx: np.ndarray
    sxy: np.ndarray
    tau: int

    @property
    def sum_y(self):
        return self.n_s * self.y_mean

    @property
    def sum_y_sq(self):
        return self.within_ss + self.n_s * self.y_mean ** 2

    @property
    def sum_x(self):
        return self.n_s * self.x_mean


@dataclass
class UndoRecord:
    """Saved slot contents and bookkeeping needed to roll an operation back."""

    member: np.ndarray
    slots: dict = field(default_factory=dict)
    lists: tuple = ()
    ints: np.ndarray = None


class Partition:
    """Node-to-block assignment backed by fixed-capacity slot arrays.

    Blocks are identified by labels that are never reused.  Internally each
    live block occupies a storage slot; slots are recycled.
    """

    def __init__(self, dataset: Dataset, membership=None, taus=None):
        if dataset.m != 1:
            raise PartitionError("graph partitions need a scalar response")
        n, k = dataset.n, dataset.k
        cap = n + 1
        self.dataset = dataset
        self.n = n
        self.k = k
        self.member = np.zeros(n, dtype=np.int64)
        self.cnt = np.zeros(cap, dtype=np.int64)
        self.label = np.full(cap, -1, dtype=np.int64)
        self.tau = np.zeros(cap, dtype=np.int64)
        self.ybar = np.zeros(cap)
        self.yss = np.zeros(cap)
        self.xbar = np.zeros((cap, k))
        self.sxx = np.zeros((cap, k, k))
        self.sxy = np.zeros((cap, k))
        self.credit = np.zeros(cap)
        self.logdet = np.zeros(cap)
        self.live = np.zeros(cap, dtype=np.int64)
        self.free = np.zeros(cap, dtype=np.int64)
        self.ints = np.zeros(K.N_INTS, dtype=np.int64)
        self.stamp = np.zeros(cap + 1, dtype=np.int64)
        self.near = np.zeros(cap + 1, dtype=np.int64)
        self.ints[K.LTOT] = -1

        if membership is None:
            membership = np.zeros(n, dtype=np.int64)
        membership = np.asarray(membership)
        if membership.shape != (n,):
            raise PartitionError("membership must have one entry per node")
        _, codes = np.unique(membership, return_inverse=True)
        nb = int(codes.max()) + 1
        self.member[:] = codes
        self.label[:nb] = np.arange(nb)
        self.live[:nb] = np.arange(nb)
        self.ints[K.NLIVE] = nb
        self.free[: cap - nb] = np.arange(cap - 1, nb - 1, -1)
        self.ints[K.NFREE] = cap - nb
        self.ints[K.NEXT_LABEL] = nb
        K.recompute_stats(self.arrays, self.data_arrays(None), k)
        self.ints[K.LTOT] = -1
        if taus is not None:
            for lab, t in dict(taus).items():
                self.tau[self.slot_of(lab)] = int(t)
            self.check_taus()

    # -- array views for the kernels -------------------------------------
    @property
    def arrays(self):
        return (self.member, self.cnt, self.label, self.tau, self.ybar, self.yss,
                self.xbar, self.sxx, self.sxy, self.credit, self.logdet,
                self.live, self.free, self.ints, self.stamp, self.near)

    def data_arrays(self, graph: Graph | None):
        ds = self.dataset
        if graph is None:
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            indices = np.zeros(0, dtype=np.int64)
        else:
            indptr, indices = graph.indptr, graph.indices
        return (ds.y, ds.x, ds.x_range, indptr, indices)

    # -- queries -----------------------------------------------------------
    @property
    def block_count(self) -> int:
        return int(self.ints[K.NLIVE])

    def live_slots(self) -> np.ndarray:
        slots = self.live[: self.block_count]
        return slots[np.argsort(self.label[slots])]

    @property
    def labels(self) -> list[int]:
        return [int(self.label[s]) for s in self.live_slots()]

    def slot_of(self, label: int) -> int:
        hit = np.flatnonzero(self.label == label)
        if len(hit) == 0:
            raise PartitionError(f"no live block with label {label}")
        return int(hit[0])

    def block_of(self, node: int) -> int:
        return int(self.label[self.member[node]])

    @property
    def membership(self) -> np.ndarray:
        """Per-node block label."""
        return self.label[self.member].copy()

    def canonical_membership(self) -> np.ndarray:
        """Labels renumbered by first occurrence, for comparing partitions."""
        _, first, inv = np.unique(self.member, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return rank[inv]

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.member == self.slot_of(label))

    def taus(self) -> dict[int, int]:
        return {int(self.label[s]): int(self.tau[s]) for s in self.live_slots()}

    def block(self, label: int) -> BlockStats:
        s = self.slot_of(label)
        return BlockStats(label, np.flatnonzero(self.member == s), int(self.cnt[s]),
                          float(self.ybar[s]), float(self.yss[s]), self.xbar[s].copy(),
                          self.sxx[s].copy(), self.sxy[s].copy(), int(self.tau[s]))

    @property
    def blocks(self) -> dict[int, BlockStats]:
        return {lab: self.block(lab) for lab in self.labels}

    def check_taus(self):
        for s in self.live_slots():
            if self.tau[s] == 1 and (self.k == 0 or self.cnt[s] < 2 * self.k):
                raise PartitionError(
                    f"block {self.label[s]} has {self.cnt[s]} nodes; full model needs {2 * self.k}")

    # -- mutation ------------------------------------------------------------
    def _snapshot(self, slots) -> UndoRecord:
        saved = {}
        for s in slots:
            saved[s] = (self.cnt[s], self.label[s], self.tau[s], self.ybar[s], self.yss[s],
                        self.xbar[s].copy(), self.sxx[s].copy(), self.sxy[s].copy(),
                        self.credit[s], self.logdet[s])
        return UndoRecord(self.member.copy(), saved,
                          (self.live.copy(), self.free.copy()), self.ints.copy())

    def undo(self, rec: UndoRecord) -> None:
        self.member[:] = rec.member
        for s, (c, lab, t, yb, ys, xb, sxx, sxy, cr, ld) in rec.slots.items():
            self.cnt[s], self.label[s], self.tau[s] = c, lab, t
            self.ybar[s], self.yss[s] = yb, ys
            self.xbar[s], self.sxx[s], self.sxy[s] = xb, sxx, sxy
            self.credit[s], self.logdet[s] = cr, ld
        self.live[:], self.free[:] = rec.lists
        self.ints[:] = rec.ints

    def move_node(self, node: int, target: int) -> UndoRecord:
        """Move ``node`` to block label ``target`` or to ``NEW_BLOCK``.

        Emptied blocks disappear.  A block that becomes too small for the
        full model has its tau reset to 0.
        """
        s = int(self.member[node])
        if target == NEW_BLOCK:
            if self.cnt[s] == 1:
                return self._snapshot([])
            t_slot = int(self.free[self.ints[K.NFREE] - 1])
            rec = self._snapshot([s, t_slot])
            t = K.TGT_NEW
        else:
            t = self.slot_of(target)
            rec = self._snapshot([s, t])
            if t == s:
                return rec
        t = K.move_node_arr(self.arrays, self.data_arrays(None), self.k, node, t)
        self._fix_small(s)
        self._fix_small(t)
        self.ints[K.LTOT] = -1
        return rec

    def merge_blocks(self, label_a: int, label_b: int) -> UndoRecord:
        if label_a == label_b:
            raise PartitionError("cannot merge a block with itself")
        a, b = self.slot_of(label_a), self.slot_of(label_b)
        rec = self._snapshot([a, b])
        K.merge_slots_arr(self.arrays, self.data_arrays(None), self.k, a, b)
        self.ints[K.LTOT] = -1
        return rec

    def _fix_small(self, s):
        if self.label[s] >= 0 and self.tau[s] == 1 and self.cnt[s] < 2 * self.k:
            self.tau[s] = 0
            self.credit[s] = 0.0
            self.logdet[s] = 0.0

    def recompute(self) -> None:
        K.recompute_stats(self.arrays, self.data_arrays(None), self.k)
        self.ints[K.LTOT] = -1

    def copy(self) -> "Partition":
        new = object.__new__(Partition)
        new.__dict__.update({key: (v.copy() if isinstance(v, np.ndarray) else v)
                             for key, v in self.__dict__.items()})
        return new


def boundary_length(partition: Partition, graph: Graph) -> int:
    """Sum over blocks of the number of outside nodes adjacent to the block."""
    return int(K.boundary_length_arr(partition.member, partition.n, graph.indptr,
                                     graph.indices, partition.stamp, partition.ints))


def within_between_ss(partition: Partition, dataset: Dataset | None = None) -> tuple[float, float]:
    ds = partition.dataset if dataset is None else dataset
    slots = partition.live_slots()
    W = float(partition.yss[slots].sum())
    B = float((partition.cnt[slots] * (partition.ybar[slots] - ds.y_bar) ** 2).sum())
    return W, B


def active_nodes(partition: Partition, graph: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Indices of active nodes and a matching island flag array."""
    active, island = K.active_nodes_arr(partition.member, graph.indptr, graph.indices)
    idx = np.flatnonzero(active)
    return idx, island[idx]
