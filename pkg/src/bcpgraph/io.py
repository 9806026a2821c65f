"""CSV and config readers, atomic writers."""
from __future__ import annotations

import csv
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ParseError",
    "read_data_csv",
    "read_edge_csv",
    "read_coords_csv",
    "load_config",
    "atomic_write_text",
    "write_rows_csv",
]

CONFIG_KEYS = {"alpha", "w_limits", "d", "p0", "M", "steps", "burn_in", "discard",
               "burn_in_fpp", "pseudo_app_fraction", "seed", "mode", "n_fpp", "n_app",
               "n_merge", "n_w", "app_island_new_block", "random_order"}


class ParseError(ValueError):
    pass


def _rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {lineno}: expected {len(header)} fields, "
                                 f"got {len(row)}")
            yield header, lineno, row


def _float(path, lineno, v):
    try:
        f = float(v)
    except ValueError:
        raise ParseError(f"{path}: row {lineno}: not a number: {v!r}") from None
    if not np.isfinite(f):
        raise ParseError(f"{path}: row {lineno}: non-finite value {v!r}")
    return f


def read_data_csv(path):
    """``id,y[,y2,...][,x1,...]`` -> (ids, Y (n, m), X (n, k)).

    Response columns are ``y`` or ``y1``, ``y2``...; predictor columns start with ``x``.
    """
    ids, ys, xs = [], [], []
    ycols = xcols = None
    for header, lineno, row in _rows(path):
        if ycols is None:
            if header[0] != "id":
                raise ParseError(f"{path}: first column must be 'id'")
            ycols = [i for i, h in enumerate(header) if h == "y" or
                     (h.startswith("y") and h[1:].isdigit())]
            xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
            extra = set(range(1, len(header))) - set(ycols) - set(xcols)
            if not ycols:
                raise ParseError(f"{path}: no response column")
            if extra:
                raise ParseError(f"{path}: unknown columns {[header[i] for i in sorted(extra)]}")
        ids.append(row[0].strip())
        ys.append([_float(path, lineno, row[i]) for i in ycols])
        xs.append([_float(path, lineno, row[i]) for i in xcols])
    if ycols is None:
        raise ParseError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise ParseError(f"{path}: duplicate ids")
    return ids, np.array(ys, dtype=float), np.array(xs, dtype=float).reshape(len(ids), len(xcols))


def read_edge_csv(path, ids=None):
    """``from,to`` edges.  With ``ids`` the endpoints are looked up as external ids."""
    lookup = {v: i for i, v in enumerate(ids)} if ids is not None else None
    edges = []
    for header, lineno, row in _rows(path):
        if header[:2] != ["from", "to"]:
            raise ParseError(f"{path}: header must be 'from,to'")
        pair = []
        for v in row[:2]:
            v = v.strip()
            if lookup is not None and v in lookup:
                pair.append(lookup[v])
                continue
            try:
                pair.append(int(v))
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: unknown node {v!r}") from None
        edges.append(tuple(pair))
    return edges


def read_coords_csv(path):
    """``id,x,y`` or ``id,lon,lat`` -> (ids, (n, 2) coordinates) in row order."""
    ids, pts = [], []
    for header, lineno, row in _rows(path):
        if header not in (["id", "x", "y"], ["id", "lon", "lat"]):
            raise ParseError(f"{path}: header must be 'id,x,y' or 'id,lon,lat'")
        ids.append(row[0].strip())
        pts.append([_float(path, lineno, row[1]), _float(path, lineno, row[2])])
    if not pts:
        raise ParseError(f"{path}: no coordinates")
    return ids, np.array(pts)


def load_config(path) -> dict:
    """JSON (``.json``) or TOML key/value config; unknown keys are rejected."""
    path = Path(path)
    text = path.read_text()
    try:
        cfg = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    bad = set(cfg) - CONFIG_KEYS
    if bad:
        raise ParseError(f"{path}: unknown config keys {sorted(bad)}")
    return cfg


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_rows_csv(path, rows: list[dict], fields=None) -> Path:
    import io

    fields = fields or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return atomic_write_text(path, buf.getvalue())
