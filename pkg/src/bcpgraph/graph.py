"""Connected undirected graphs on dense node ids 0..n-1."""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "InvalidSizeError",
    "InvalidEdgeError",
    "ConnectivityError",
    "build_path_graph",
    "build_grid_graph",
    "build_mst_graph",
    "load_edge_list",
    "total_edge_length",
    "is_path",
]

KINDS = ("path", "grid4", "grid8", "mst", "custom")


class GraphError(ValueError):
    """Invalid size, edge, coordinate or connectivity."""


class InvalidSizeError(GraphError):
    pass


class InvalidEdgeError(GraphError):
    pass


class ConnectivityError(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    """Immutable adjacency structure.

    ``indptr``/``indices`` hold the sorted neighbor lists in CSR form; the
    samplers consume these arrays directly.
    """

    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    kind: str = "custom"
    shape: tuple[int, int] | None = None
    _edges: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphError(f"unknown graph kind {self.kind!r}")
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        if self._edges is None:
            rows = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
            mask = rows < self.indices
            edges = np.column_stack([rows[mask], self.indices[mask]]).astype(np.int64)
            edges.setflags(write=False)
            object.__setattr__(self, "_edges", edges)

    @property
    def n(self) -> int:
        return self.node_count

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) array of edges (i, j) with i < j, lexicographically sorted."""
        return self._edges

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    @property
    def adjacency(self) -> list[tuple[int, ...]]:
        return [tuple(int(j) for j in self.neighbors(i)) for i in range(self.node_count)]

    def is_connected(self) -> bool:
        return len(_reachable(self.indptr, self.indices, 0)) == self.node_count

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], kind="custom",
                   shape=None, check_connected=True) -> "Graph":
        if n < 1:
            raise InvalidSizeError("graph needs at least one node")
        adj: list[set[int]] = [set() for _ in range(n)]
        for a, b in edges:
            a, b = int(a), int(b)
            if not (0 <= a < n and 0 <= b < n):
                raise InvalidEdgeError(f"edge ({a}, {b}) has an endpoint outside 0..{n - 1}")
            if a == b:
                raise InvalidEdgeError(f"self-loop at node {a}")
            adj[a].add(b)
            adj[b].add(a)
        indptr = np.zeros(n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(s) for s in adj])
        indices = np.fromiter((j for s in adj for j in sorted(s)), dtype=np.int64,
                              count=int(indptr[-1]))
        if check_connected and len(_reachable(indptr, indices, 0)) != n:
            raise ConnectivityError("graph is not connected")
        return cls(n, indptr, indices, kind, shape)


def _reachable(indptr, indices, start):
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for u in indices[indptr[v]:indptr[v + 1]]:
            u = int(u)
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


def build_path_graph(n: int) -> Graph:
    if n < 1:
        raise InvalidSizeError("path graph needs n >= 1")
    return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)), kind="path")


def build_grid_graph(rows: int, cols: int, neighborhood: str | int = "four") -> Graph:
    """Grid with node id ``r * cols + c``.

    ``neighborhood`` is ``"four"`` (orthogonal) or ``"eight"`` (adds diagonals);
    4 and 8 are accepted as aliases.
    """
    if rows < 1 or cols < 1:
        raise InvalidSizeError("grid dimensions must be positive")
    nb = {"four": 4, "4": 4, 4: 4, "eight": 8, "8": 8, 8: 8}.get(neighborhood)
    if nb is None:
        raise GraphError(f"neighborhood must be 'four' or 'eight', got {neighborhood!r}")
    offsets = [(0, 1), (1, 0)]
    if nb == 8:
        offsets += [(1, 1), (1, -1)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            for dr, dc in offsets:
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    edges.append((r * cols + c, rr * cols + cc))
    return Graph.from_edges(rows * cols, edges, kind=f"grid{nb}", shape=(rows, cols))


def build_mst_graph(coords: Sequence[Sequence[float]]) -> Graph:
    """Euclidean minimum spanning tree by Prim's algorithm from node 0.

    Equal-length candidates are resolved by the smallest (tree endpoint,
    new endpoint) pair, which the heap ordering gives for free.
    """
    pts = np.asarray(coords, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] != 2:
        raise GraphError("coordinates must be a non-empty list of (x, y) pairs")
    if not np.all(np.isfinite(pts)):
        raise GraphError("coordinates must be finite")
    n = len(pts)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    heap = []

    def push_from(v):
        d = np.hypot(*(pts - pts[v]).T)
        for u in np.flatnonzero(~in_tree):
            heapq.heappush(heap, (float(d[u]), v, int(u)))

    push_from(0)
    edges = []
    while len(edges) < n - 1:
        dist, v, u = heapq.heappop(heap)
        if in_tree[u]:
            continue
        in_tree[u] = True
        edges.append((v, u))
        push_from(u)
    return Graph.from_edges(n, edges, kind="mst")


def load_edge_list(n: int, edges: Iterable[tuple[int, int]]) -> Graph:
    """Deduplicated undirected graph from an edge list; must be connected."""
    return Graph.from_edges(n, edges, kind="custom")


def total_edge_length(graph: Graph, coords) -> float:
    pts = np.asarray(coords, dtype=float)
    e = graph.edges
    return float(np.hypot(*(pts[e[:, 0]] - pts[e[:, 1]]).T).sum()) if len(e) else 0.0


def is_path(graph: Graph) -> bool:
    """True when the edges are exactly (i, i+1)."""
    n = graph.node_count
    if graph.edge_count != n - 1:
        return False
    e = graph.edges
    return bool(np.all(e[:, 0] == np.arange(n - 1)) and np.all(e[:, 1] == np.arange(1, n)))
