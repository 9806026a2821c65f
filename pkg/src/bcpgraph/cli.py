"""Command line: ``fit``, ``simulate`` and ``sweep``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import io as bio
from .graph import GraphError, build_grid_graph, build_mst_graph, build_path_graph, is_path
from .graph import load_edge_list
from .harness import ARCHETYPES, RESULT_FIELDS, archetype, load_scene, run_experiment
from .harness import simulate_scene, ExperimentLog
from .likelihood import ModelConfig
from .models import fit_classical_path, fit_graph_regression, fit_multivariate_path
from .plotting import heatmap_svg, line_panels_svg, mse_alpha_svg
from .sampler import SamplerSchedule

OUT_ENV = "BCPGRAPH_OUT"
MODEL_KEYS = ("alpha", "w_limits", "d", "p0")
SCHEDULE_KEYS = {"M": "steps", "steps": "steps", "burn_in": "discard", "discard": "discard",
                 "burn_in_fpp": "burn_in_fpp", "pseudo_app_fraction": "pseudo_app_fraction",
                 "n_fpp": "n_fpp", "n_app": "n_app", "n_merge": "n_merge", "n_w": "n_w",
                 "app_island_new_block": "app_island_new_block",
                 "random_order": "random_order"}


class UsageError(Exception):
    pass


def _versions() -> dict:
    import numba

    try:
        from importlib.metadata import version
        pkg = version("artifact")
    except Exception:
        pkg = "unknown"
    return {"artifact": pkg, "python": platform.python_version(), "numpy": np.__version__,
            "numba": numba.__version__}


def _split_config(cfg: dict, args) -> tuple[ModelConfig, SamplerSchedule, dict]:
    model = {k: cfg[k] for k in MODEL_KEYS if k in cfg}
    if isinstance(model.get("w_limits"), list):
        model["w_limits"] = tuple(model["w_limits"])
    sched = {SCHEDULE_KEYS[k]: v for k, v in cfg.items() if k in SCHEDULE_KEYS}
    for attr, key in (("alpha", "alpha"),):
        if getattr(args, attr, None) is not None:
            model[key] = getattr(args, attr)
    if getattr(args, "steps", None) is not None:
        sched["steps"] = args.steps
    if getattr(args, "discard", None) is not None:
        sched["discard"] = args.discard
    if "steps" in sched and "discard" not in sched:
        sched["discard"] = min(SamplerSchedule().discard, int(sched["steps"]) // 2)
    try:
        return ModelConfig(**model), SamplerSchedule(**sched), {**model, **sched}
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def _parse_grid(text: str):
    m = re.fullmatch(r"(\d+)x(\d+)(?::(4|8))?", text.strip())
    if not m:
        raise UsageError(f"--grid must look like RxC or RxC:8, got {text!r}")
    return int(m.group(1)), int(m.group(2)), "eight" if m.group(3) == "8" else "four"


def _build_graph(args, mode, ids, n):
    sources = [s for s in (args.graph, args.grid, args.mst_coords) if s]
    if len(sources) > 1:
        raise UsageError("give at most one of --graph, --grid, --mst-coords")
    if args.grid:
        r, c, nb = _parse_grid(args.grid)
        if r * c != n:
            raise UsageError(f"grid {r}x{c} has {r * c} nodes but the data has {n} rows")
        g = build_grid_graph(r, c, nb)
    elif args.mst_coords:
        cids, pts = bio.read_coords_csv(args.mst_coords)
        if cids != ids:
            raise UsageError("coordinate ids must match data ids in the same order")
        g = build_mst_graph(pts)
    elif args.graph:
        g = load_edge_list(n, bio.read_edge_csv(args.graph, ids))
    elif mode in ("path", "multivariate"):
        g = build_path_graph(n)
    else:
        raise UsageError("graph mode needs --graph, --grid or --mst-coords")
    if mode in ("path", "multivariate") and not is_path(g):
        raise UsageError(f"{mode} mode needs a path graph")
    return g


def cmd_fit(args) -> int:
    t0 = time.time()
    cfg = bio.load_config(args.config) if args.config else {}
    mode = args.mode or cfg.get("mode")
    if mode not in ("path", "multivariate", "graph"):
        raise UsageError("--mode must be path, multivariate or graph")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    config, schedule, echo = _split_config(cfg, args)
    ids, Y, X = bio.read_data_csv(args.data)
    n = len(ids)
    if Y.shape[1] > 1 and mode != "multivariate":
        raise UsageError("several response columns need --mode multivariate")
    if X.shape[1] and mode != "graph":
        raise UsageError("predictor columns are only used in graph mode")
    graph = _build_graph(args, mode, ids, n)
    if mode == "path":
        summ = fit_classical_path(Y[:, 0], config, seed, schedule)
    elif mode == "multivariate":
        summ = fit_multivariate_path(Y, config, seed, schedule)
    else:
        summ = fit_graph_regression(graph, X, Y[:, 0], config, seed, schedule)
    out = Path(args.out or os.environ.get(OUT_ENV, "."))
    yy = Y[:, 0] if Y.shape[1] == 1 else Y
    rows = summ.to_rows(yy)
    for r, i in zip(rows, ids):
        r["id"] = i
    files = {"posterior": str(bio.write_rows_csv(out / "posterior.csv", rows))}
    if args.plot:
        files["plot"] = str(bio.atomic_write_text(out / "posterior.svg",
                                                  _fit_plot(summ, yy, graph)))
    manifest = {
        "command": ["fit"] + sys.argv[2:] if args.argv is None else args.argv,
        "mode": mode,
        "seed": seed,
        "config": {"alpha": config.alpha, "w_limits": config.w_lim.tolist(), "d": config.d,
                   "p0": config.p0, "k": int(X.shape[1])},
        "schedule": dict(schedule.__dict__),
        "config_file": echo,
        "graph": {"kind": graph.kind, "nodes": graph.node_count, "edges": graph.edge_count},
        "versions": _versions(),
        "wall_time_s": time.time() - t0,
        "summary": summ.manifest(),
        "outputs": files,
    }
    files["manifest"] = str(out / "manifest.json")
    bio.atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, default=str) + "\n")
    print(f"wrote {', '.join(files.values())}")
    return 0


def _fit_plot(summ, y, graph) -> str:
    if graph.shape is not None and np.ndim(summ.posterior_mean) == 1:
        r, c = graph.shape
        return heatmap_svg([("data", np.asarray(y).reshape(r, c)),
                            ("posterior mean", summ.posterior_mean.reshape(r, c)),
                            ("boundary prob", summ.node_boundary_prob.reshape(r, c))])
    mean = np.asarray(summ.posterior_mean)
    series = ({"data": y, "posterior mean": mean} if mean.ndim == 1 else
              {f"mean {j + 1}": mean[:, j] for j in range(mean.shape[1])})
    second = (("change point probability", {"cp_prob": np.r_[np.nan, summ.cp_prob[1:]]})
              if summ.cp_prob is not None else
              ("boundary probability", {"node": summ.node_boundary_prob}))
    return line_panels_svg([("posterior mean", series), second],
                           ylims=[None, (0.0, 1.0)])


def cmd_simulate(args) -> int:
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    if bool(args.scene) == bool(args.archetype):
        raise UsageError("give exactly one of --scene or --archetype")
    if args.archetype:
        if args.archetype not in ARCHETYPES:
            raise UsageError(f"unknown archetype {args.archetype!r}; "
                             f"choose from {', '.join(sorted(ARCHETYPES))}")
        spec = archetype(args.archetype, args.rows, args.cols, args.sigma)
    else:
        base = load_scene(args.scene)
        spec = type(base)(base.name, base.block_map, base.block_means, args.sigma)
    ds, truth = simulate_scene(spec, args.seed)
    out = Path(args.out)
    bio.write_rows_csv(out, [{"id": i, "y": float(v)} for i, v in enumerate(ds.y)])
    tpath = out.with_name(out.stem + "_truth.csv")
    bio.write_rows_csv(tpath, [{"id": i, "theta": float(t), "block": int(b)}
                               for i, (t, b) in enumerate(zip(truth, spec.block_map.ravel()))])
    print(f"wrote {out}, {tpath} ({spec.rows}x{spec.cols}, grid id = r*cols+c)")
    return 0


def cmd_sweep(args) -> int:
    d = Path(args.scenes)
    files = sorted(p for p in d.glob("*.csv") if p.with_suffix(".json").exists()) \
        if d.is_dir() else []
    if not files:
        raise UsageError(f"no scenes (CSV + JSON sidecar) in {args.scenes}")
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except ValueError:
        raise UsageError("--alphas must be a comma separated list of numbers") from None
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    scenes = [load_scene(p) for p in files]
    sched = SamplerSchedule(steps=args.steps, discard=args.discard)
    log = ExperimentLog()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        run_experiment(scenes, alphas, methods, args.replicates, sched, out_csv=out,
                       seed_base=args.seed, neighborhood=args.neighborhood, log=log)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.plot:
        rows = [r.row() for r in log.results]
        for s in scenes:
            bio.atomic_write_text(out.with_name(f"{out.stem}_{s.name}.svg"),
                                  mse_alpha_svg(rows, s.name))
    if log.failures:
        fpath = out.with_name(out.stem + "_failures.json")
        bio.atomic_write_text(fpath, json.dumps(log.failures, indent=2) + "\n")
        print(f"{len(log.failures)} runs failed; see {fpath}", file=sys.stderr)
    print(f"wrote {len(log.results)} rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bcpgraph", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a change point model to a data CSV")
    f.add_argument("--mode", choices=["path", "multivariate", "graph"])
    f.add_argument("--data", required=True, help="CSV with id,y[,y2..][,x1..]")
    f.add_argument("--graph", help="edge CSV with header from,to")
    f.add_argument("--grid", help="RxC or RxC:8 grid (node id r*cols+c)")
    f.add_argument("--mst-coords", help="CSV id,x,y for a minimum spanning tree")
    f.add_argument("--config", help="JSON or TOML config")
    f.add_argument("--seed", type=int)
    f.add_argument("--alpha", type=float)
    f.add_argument("--steps", type=int)
    f.add_argument("--discard", type=int)
    f.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    f.add_argument("--plot", action="store_true")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="simulate a grid scene")
    s.add_argument("--scene", help="scene CSV with a JSON sidecar")
    s.add_argument("--archetype", help=f"one of {', '.join(sorted(ARCHETYPES))}")
    s.add_argument("--rows", type=int, default=20)
    s.add_argument("--cols", type=int, default=20)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="alpha sweep over scenes and methods")
    w.add_argument("--scenes", required=True, help="directory of scene CSV + JSON pairs")
    w.add_argument("--alphas", required=True)
    w.add_argument("--methods", default="BCP-Graph-0,BCP-Graph-1")
    w.add_argument("--replicates", type=int, default=10)
    w.add_argument("--steps", type=int, default=2000)
    w.add_argument("--discard", type=int, default=1000)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--neighborhood", choices=["four", "eight"], default="eight")
    w.add_argument("--out", required=True)
    w.add_argument("--plot", action="store_true")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = list(argv) if argv is not None else sys.argv[1:]
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (bio.ParseError, GraphError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
