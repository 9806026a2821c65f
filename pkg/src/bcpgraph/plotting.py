"""Tiny SVG writers: polylines over node index and grid heatmaps."""
from __future__ import annotations

from html import escape

import numpy as np

__all__ = ["line_panels_svg", "heatmap_svg", "mse_alpha_svg"]

W, H, PAD = 640, 200, 40
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _panel(series: dict, top: float, title: str, xs=None, ylim=None) -> list[str]:
    vals = [np.asarray(v, float) for v in series.values()]
    allv = np.concatenate([v[np.isfinite(v)] for v in vals]) if vals else np.zeros(1)
    lo, hi = ylim if ylim else (float(allv.min()), float(allv.max()))
    if hi <= lo:
        hi = lo + 1.0
    n = max(len(v) for v in vals)
    xs = np.arange(n) if xs is None else np.asarray(xs, float)
    x0, x1 = float(xs.min()), float(xs.max()) if n > 1 else float(xs.min()) + 1
    out = [f'<rect x="{PAD}" y="{top}" width="{W - 2 * PAD}" height="{H - PAD}" '
           f'fill="none" stroke="#999"/>',
           f'<text x="{PAD}" y="{top - 6}" font-size="12">{escape(title)}</text>',
           f'<text x="4" y="{top + 10}" font-size="9">{hi:.3g}</text>',
           f'<text x="4" y="{top + H - PAD}" font-size="9">{lo:.3g}</text>']
    for c, (name, v) in enumerate(series.items()):
        v = np.asarray(v, float)
        px = PAD + (xs[: len(v)] - x0) / max(x1 - x0, 1e-12) * (W - 2 * PAD)
        py = top + (H - PAD) * (1 - (v - lo) / (hi - lo))
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py) if np.isfinite(b))
        col = PALETTE[c % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{W - PAD - 120}" y="{top + 12 + 12 * c}" font-size="10" '
                   f'fill="{col}">{escape(name)}</text>')
    return out


def line_panels_svg(panels: list[tuple[str, dict]], xs=None, ylims=None) -> str:
    """Stacked panels; each is (title, {label: values})."""
    body = []
    for p, (title, series) in enumerate(panels):
        lim = ylims[p] if ylims else None
        body += _panel(series, PAD / 2 + 12 + p * H, title, xs, lim)
    height = int(len(panels) * H + PAD)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}">\n'
            + "\n".join(body) + "\n</svg>\n")


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    r = int(255 * t)
    b = int(255 * (1 - t))
    return f"#{r:02x}40{b:02x}"


def heatmap_svg(grids: list[tuple[str, np.ndarray]], cell: int = 12) -> str:
    """Side-by-side heatmaps, each scaled to its own range."""
    parts = []
    x = PAD / 2
    height = 0
    for title, g in grids:
        g = np.asarray(g, float)
        lo, hi = float(np.nanmin(g)), float(np.nanmax(g))
        span = hi - lo if hi > lo else 1.0
        parts.append(f'<text x="{x}" y="14" font-size="12">{escape(title)}</text>')
        for r in range(g.shape[0]):
            for c in range(g.shape[1]):
                parts.append(f'<rect x="{x + c * cell}" y="{20 + r * cell}" width="{cell}" '
                             f'height="{cell}" fill="{_color((g[r, c] - lo) / span)}"/>')
        x += g.shape[1] * cell + PAD / 2
        height = max(height, 20 + g.shape[0] * cell + 10)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(x)}" height="{height}">\n'
            + "\n".join(parts) + "\n</svg>\n")


def mse_alpha_svg(rows: list[dict], scene: str) -> str:
    """Mean MSE against alpha per method for one scene."""
    methods = sorted({r["method"] for r in rows if r["scene"] == scene})
    alphas = sorted({float(r["alpha"]) for r in rows if r["scene"] == scene})
    series = {}
    for m in methods:
        series[m] = [np.mean([float(r["mse"]) for r in rows if r["scene"] == scene
                              and r["method"] == m and float(r["alpha"]) == a] or [np.nan])
                     for a in alphas]
    return line_panels_svg([(f"{scene}: mean MSE vs alpha", series)], xs=alphas)
