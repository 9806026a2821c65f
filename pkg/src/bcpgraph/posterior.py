"""Per-step conditional expectations and their aggregation over a chain."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _core
from . import _kernels as K

__all__ = [
    "StepEstimate",
    "PosteriorSummary",
    "w0_star",
    "step_expectations",
    "aggregate",
    "evaluate_mse",
]

# nodes for the fallback quadrature of E(w0)
GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(200)


@dataclass
class StepEstimate:
    fitted: np.ndarray
    sigma2: float
    b: int
    boundary_edges: np.ndarray
    active: np.ndarray
    w0_star: float = float("nan")
    membership: np.ndarray | None = None


@dataclass
class PosteriorSummary:
    """Chain-level estimates.

    ``cp_prob`` is only set for path graphs; entry 0 is 1 by convention and
    carries no information.
    """

    posterior_mean: np.ndarray
    posterior_var: np.ndarray
    edge_change_prob: np.ndarray
    node_boundary_prob: np.ndarray
    mean_blocks: float
    n_steps: int
    cp_prob: np.ndarray | None = None
    sigma2_mean: float = float("nan")
    runtime: float = 0.0
    modal_partition: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def to_rows(self, y) -> list[dict]:
        """Per-node rows for the posterior CSV."""
        y = np.asarray(y)
        rows = []
        for i in range(len(self.node_boundary_prob)):
            row = {"id": i}
            if y.ndim == 1:
                row["y"] = float(y[i])
                row["posterior_mean"] = float(self.posterior_mean[i])
                row["posterior_var"] = float(self.posterior_var[i])
            else:
                for d in range(y.shape[1]):
                    row[f"y{d + 1}"] = float(y[i, d])
                for d in range(y.shape[1]):
                    row[f"posterior_mean{d + 1}"] = float(self.posterior_mean[i, d])
                    row[f"posterior_var{d + 1}"] = float(self.posterior_var[i, d])
            row["node_boundary_prob"] = float(self.node_boundary_prob[i])
            if self.cp_prob is not None:
                row["cp_prob"] = "" if i == 0 else float(self.cp_prob[i])
            if self.modal_partition is not None:
                row["modal_block"] = int(self.modal_partition[i])
            rows.append(row)
        return rows

    def manifest(self) -> dict:
        out = {
            "n_steps": self.n_steps,
            "mean_blocks": self.mean_blocks,
            "sigma2_mean": None if np.isnan(self.sigma2_mean) else self.sigma2_mean,
            "runtime_s": self.runtime,
            "variance": "between-step variance of conditional means only",
        }
        out.update(self.extra)
        return json.loads(json.dumps(out, default=_jsonable))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def w0_star(B: float, Wt: float, b: int, n: int, w0_limit: float, m: int = 1) -> float:
    """E(w0 | y, x, rho, tau): w0'/2 when B is zero, else a ratio of incomplete betas.

    Falls back to quadrature of the w0 conditional when the closed form's
    second shape parameter is not positive.
    """
    bz = b <= 1 or B <= 0
    return float(_core.w0_star(float(Wt), float(B), int(b), int(n), int(m), float(w0_limit),
                               bz, GL_NODES, GL_WEIGHTS))


def step_expectations(state, dataset=None, config=None) -> StepEstimate:
    """Conditional means of every node for the state's current partition."""
    part = state.partition
    fitted = np.empty(part.n)
    sig2, w0s, _, _ = K.step_fitted(part.arrays, part.data_arrays(state.graph), state.params,
                                    state.w, part.k, GL_NODES, GL_WEIGHTS, fitted)
    member = part.member
    e = state.graph.edges
    active, _ = K.active_nodes_arr(member, state.graph.indptr, state.graph.indices)
    return StepEstimate(fitted, float(sig2), part.block_count,
                        member[e[:, 0]] != member[e[:, 1]], active, float(w0s))


def aggregate(steps: Sequence[StepEstimate], graph=None, mode: str = "graph") -> PosteriorSummary:
    """Fold retained steps into posterior means, variances and boundary frequencies."""
    steps = list(steps)
    if not steps:
        raise ValueError("no retained steps to aggregate")
    fitted = np.stack([s.fitted for s in steps])
    mean = fitted.mean(axis=0)
    var = fitted.var(axis=0, ddof=1) if len(steps) > 1 else np.zeros_like(mean)
    edge = np.mean([s.boundary_edges for s in steps], axis=0)
    node = np.mean([s.active for s in steps], axis=0)
    sig = np.array([s.sigma2 for s in steps], dtype=float)
    cp = None
    if mode == "path" or (graph is not None and graph.kind == "path"):
        cp = np.ones(len(mean) if mean.ndim == 1 else mean.shape[0])
        cp[1:] = edge
    return PosteriorSummary(
        posterior_mean=mean,
        posterior_var=var,
        edge_change_prob=edge,
        node_boundary_prob=node,
        mean_blocks=float(np.mean([s.b for s in steps])),
        n_steps=len(steps),
        cp_prob=cp,
        sigma2_mean=float(np.nanmean(sig)) if np.any(np.isfinite(sig)) else float("nan"),
    )


def evaluate_mse(posterior_mean, truth) -> float:
    a = np.asarray(posterior_mean, float)
    b = np.asarray(truth, float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))
