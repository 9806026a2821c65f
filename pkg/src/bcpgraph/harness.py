"""Simulated grid scenes and alpha sweeps comparing pseudo and original APPs."""
from __future__ import annotations

import csv
import json
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import build_grid_graph
from .likelihood import ModelConfig
from .partition import Dataset
from .posterior import aggregate, evaluate_mse
from .sampler import SamplerSchedule, run_chain

__all__ = [
    "SceneSpec",
    "ExperimentResult",
    "ARCHETYPES",
    "archetype",
    "simulate_scene",
    "run_experiment",
    "write_scene",
    "load_scene",
    "RESULT_FIELDS",
]

METHODS = {"BCP-Graph-0": 1.0, "BCP-Graph-1": 0.0}
RESULT_FIELDS = ["scene", "method", "alpha", "seed", "mse", "runtime_s", "mean_blocks"]


@dataclass(frozen=True)
class SceneSpec:
    name: str
    block_map: np.ndarray
    block_means: tuple
    sigma: float = 1.0

    def __post_init__(self):
        bm = np.asarray(self.block_map, dtype=np.int64)
        if bm.ndim != 2 or bm.size == 0:
            raise ValueError("block_map must be a non-empty 2-d array")
        ids = np.unique(bm)
        if not np.array_equal(ids, np.arange(len(ids))):
            raise ValueError("block ids must be dense 0..b-1")
        if len(self.block_means) != len(ids):
            raise ValueError(f"need {len(ids)} block means, got {len(self.block_means)}")
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ValueError("sigma must be positive")
        bm.setflags(write=False)
        object.__setattr__(self, "block_map", bm)
        object.__setattr__(self, "block_means", tuple(float(v) for v in self.block_means))

    @property
    def rows(self) -> int:
        return self.block_map.shape[0]

    @property
    def cols(self) -> int:
        return self.block_map.shape[1]

    @property
    def truth(self) -> np.ndarray:
        return np.asarray(self.block_means)[self.block_map.ravel()]


def _half_split(r, c):
    bm = np.zeros((r, c), dtype=int)
    bm[:, c // 2:] = 1
    return bm, (0.0, 1.0)


def _quadrants(r, c):
    bm = np.zeros((r, c), dtype=int)
    bm[: r // 2, c // 2:] = 1
    bm[r // 2:, : c // 2] = 2
    bm[r // 2:, c // 2:] = 3
    return bm, (0.0, 1.0, 2.0, 3.0)


def _single_island(r, c):
    bm = np.zeros((r, c), dtype=int)
    bm[r // 2 - r // 5: r // 2 + r // 5, c // 2 - c // 5: c // 2 + c // 5] = 1
    return bm, (0.0, 2.0)


def _stripes(r, c):
    width = max(c // 4, 1)
    bm = np.repeat((np.arange(c) // width)[None, :], r, axis=0)
    _, bm = np.unique(bm, return_inverse=True)
    bm = bm.reshape(r, c)
    return bm, tuple(float(i % 2) for i in range(bm.max() + 1))


def _checkerboard(r, c):
    rr, cc = np.indices((r, c))
    bm = ((rr // 2 + cc // 2) % 2).astype(int)
    if bm.max() == 0:
        return bm, (0.0,)
    return bm, (0.0, 1.0)


def _nested_square(r, c):
    rr, cc = np.indices((r, c))
    depth = np.minimum(np.minimum(rr, r - 1 - rr), np.minimum(cc, c - 1 - cc))
    d = min(r, c)
    bm = np.where(depth < d // 6, 0, np.where(depth < d // 3, 1, 2))
    _, bm = np.unique(bm, return_inverse=True)
    bm = bm.reshape(r, c)
    return bm, (0.0, 1.0, 2.0)[: bm.max() + 1]


ARCHETYPES = {
    "half-split": _half_split,
    "quadrants": _quadrants,
    "single-island": _single_island,
    "stripes": _stripes,
    "checkerboard": _checkerboard,
    "nested-square": _nested_square,
}


def archetype(name: str, rows: int = 20, cols: int = 20, sigma: float = 1.0,
              means: Sequence[float] | None = None) -> SceneSpec:
    """Built-in scene; ``means`` overrides the default block means."""
    if name not in ARCHETYPES:
        raise KeyError(f"unknown archetype {name!r}; choose from {sorted(ARCHETYPES)}")
    bm, default = ARCHETYPES[name](rows, cols)
    return SceneSpec(name, bm, tuple(means) if means is not None else default, sigma)


def simulate_scene(spec: SceneSpec, seed) -> tuple[Dataset, np.ndarray]:
    """y = theta + N(0, sigma^2) on the flattened grid (node id r * cols + c)."""
    rng = np.random.default_rng(seed)
    truth = spec.truth
    y = truth + spec.sigma * rng.standard_normal(truth.shape)
    return Dataset(y), truth


@dataclass
class ExperimentResult:
    scene: str
    method: str
    alpha: float
    seed: int
    mse: float
    runtime_s: float
    mean_blocks: float

    def row(self) -> dict:
        return {f: getattr(self, f) for f in RESULT_FIELDS}


@dataclass
class ExperimentLog:
    results: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def _seed_ladder(base: int, scene_idx: int, rep: int) -> int:
    """Replicate seed shared by every method and alpha of one replicate set."""
    ss = np.random.SeedSequence([base, scene_idx, rep])
    return int(ss.generate_state(1)[0])


def run_experiment(scenes: Iterable[SceneSpec], alphas: Sequence[float],
                   methods: Sequence[str] = ("BCP-Graph-0", "BCP-Graph-1"),
                   replicates: int = 10, schedule: SamplerSchedule | None = None,
                   out_csv=None, seed_base: int = 0, neighborhood: str = "eight",
                   log: ExperimentLog | None = None) -> list[ExperimentResult]:
    """Full factorial sweep, one chain per (scene, replicate, method, alpha).

    Rows are appended to ``out_csv`` and flushed as each run finishes.  A run
    that raises is recorded in ``log.failures`` and skipped.
    """
    schedule = schedule or SamplerSchedule()
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
    log = log if log is not None else ExperimentLog()
    fh = writer = None
    if out_csv is not None:
        fh = open(out_csv, "w", newline="")
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        writer.writeheader()
        fh.flush()
    try:
        for si, spec in enumerate(scenes):
            graph = build_grid_graph(spec.rows, spec.cols, neighborhood)
            for rep in range(replicates):
                seed = _seed_ladder(seed_base, si, rep)
                ds, truth = simulate_scene(spec, seed)
                for method in methods:
                    sched = SamplerSchedule(**{**schedule.__dict__,
                                               "pseudo_app_fraction": METHODS[method]})
                    for alpha in alphas:
                        try:
                            t0 = time.perf_counter()
                            out = run_chain(ds, graph, ModelConfig(alpha=float(alpha)), sched, seed)
                            summ = aggregate(out.steps, graph)
                            res = ExperimentResult(spec.name, method, float(alpha), seed,
                                                   evaluate_mse(summ.posterior_mean, truth),
                                                   out.runtime, summ.mean_blocks)
                        except Exception as exc:  # keep the sweep going
                            log.failures.append({
                                "scene": spec.name, "method": method, "alpha": alpha,
                                "seed": seed, "error": repr(exc),
                                "trace": traceback.format_exc(),
                                "elapsed": time.perf_counter() - t0,
                            })
                            continue
                        log.results.append(res)
                        if writer is not None:
                            writer.writerow(res.row())
                            fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return log.results


def write_scene(spec: SceneSpec, path) -> tuple[Path, Path]:
    """Block map CSV (rows x cols integers) plus a JSON sidecar with means and sigma."""
    from .io import atomic_write_text

    path = Path(path)
    text = "\n".join(",".join(str(int(v)) for v in row) for row in spec.block_map) + "\n"
    atomic_write_text(path, text)
    side = path.with_suffix(".json")
    atomic_write_text(side, json.dumps({"name": spec.name, "block_means": list(spec.block_means),
                                        "sigma": spec.sigma}, indent=2) + "\n")
    return path, side


def load_scene(path) -> SceneSpec:
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([int(c) for c in row])
            except ValueError:
                raise ValueError(f"{path}: row {lineno}: block ids must be integers") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: block map must be a non-empty rectangle")
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text())
    return SceneSpec(meta.get("name", path.stem), np.array(rows), tuple(meta["block_means"]),
                     float(meta["sigma"]))
