"""Minimal self-contained SVG line charts."""
from __future__ import annotations

import math
from html import escape
from typing import Mapping

import numpy as np

__all__ = ["PlotError", "emit_plot"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]


class PlotError(ValueError):
    pass


def _decimate(x, y, max_points, geometric=False):
    # thin to about max_points indices, always keeping the extremes of y
    if x.size <= max_points:
        return x, y
    if geometric:
        base = np.geomspace(1, x.size, max_points) - 1
    else:
        base = np.linspace(0, x.size - 1, max_points)
    idx = np.unique(np.concatenate([base.astype(int), [int(np.argmin(y)), int(np.argmax(y))]]))
    return x[idx], y[idx]


def _ticks(lo, hi, log):
    if log:
        return [float(10 ** k) for k in range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1)]
    step = 10 ** math.floor(math.log10(hi - lo)) if hi > lo else 1.0
    if (hi - lo) / step < 3:
        step /= 2
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step) + 1)]


def emit_plot(series: Mapping[str, tuple], path, log_x: bool = False, log_y: bool = False,
              title: str = "", x_label: str = "n", y_label: str = "", mark_min: bool = True,
              description: str = "", max_points: int = 4000, width: int = 720,
              height: int = 440) -> None:
    """Write ``series`` (``name -> (x, y)``) as an SVG line chart.

    With ``mark_min`` the minimum of the first series is drawn as a circle
    whose ``data-min-index`` attribute holds its position in the input arrays
    and ``data-min-x`` its abscissa.
    """
    if not series:
        raise PlotError("at least one series is required")
    data = []
    for name, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size == 0 or x.shape != y.shape:
            raise PlotError(f"series {name!r} is empty or has mismatched x/y")
        if log_x and np.any(x <= 0):
            raise PlotError(f"series {name!r} has non-positive x on a log axis")
        if log_y and np.any(y <= 0):
            raise PlotError(f"series {name!r} has non-positive y on a log axis")
        data.append((name, x, y))

    tx = np.log10 if log_x else (lambda v: v)
    ty = np.log10 if log_y else (lambda v: v)
    xs = np.concatenate([tx(d[1]) for d in data])
    ys = np.concatenate([ty(d[2]) for d in data])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    left, right, top, bottom = 70, 20, 36, 50
    pw, ph = width - left - right, height - top - bottom
    px = lambda v: left + (v - x0) / (x1 - x0) * pw
    py = lambda v: top + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">']
    if description:
        out.append(f"<desc>{escape(description)}</desc>")
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    if title:
        out.append(f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for t in _ticks(x0, x1, log_x):
        v = math.log10(t) if log_x else t
        if x0 <= v <= x1:
            out.append(f'<line x1="{px(v):.2f}" y1="{top + ph}" x2="{px(v):.2f}" y2="{top + ph + 4}" stroke="#444"/>')
            out.append(f'<text x="{px(v):.2f}" y="{top + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1, log_y):
        v = math.log10(t) if log_y else t
        if y0 <= v <= y1:
            out.append(f'<line x1="{left - 4}" y1="{py(v):.2f}" x2="{left}" y2="{py(v):.2f}" stroke="#444"/>')
            out.append(f'<text x="{left - 6}" y="{py(v) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(x_label)}</text>')
    if y_label:
        out.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2})">{escape(y_label)}</text>')
    for k, (name, x, y) in enumerate(data):
        color = _COLORS[k % len(_COLORS)]
        dx, dy = _decimate(tx(x), ty(y), max_points, log_x)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(dx, dy))
        out.append(f'<path class="series" data-name="{escape(name)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.4" d="M {pts.replace(" ", " L ")}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 14 + 14 * k}" fill="{color}">{escape(name)}</text>')
    if mark_min:
        name, x, y = data[0]
        i = int(np.argmin(y))
        out.append(f'<circle class="min-marker" data-min-index="{i}" data-min-x="{x[i]:.17g}" cx="{px(tx(x[i])):.2f}" '
                   f'cy="{py(ty(y[i])):.2f}" r="4" fill="none" stroke="#000"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
