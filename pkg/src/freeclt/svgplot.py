"""Minimal self-contained log-log SVG plots (no plotting dependency).

The emitted text is a pure function of the data: fixed canvas geometry,
fixed palette, fixed number formatting.  Nonpositive values cannot appear
on log axes and are skipped.
"""
from __future__ import annotations

import math

__all__ = ["log_log_svg"]

_W, _H = 840, 560
_ML, _MR, _MT, _MB = 90, 200, 50, 70
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v):
    return f"{v:.2f}"


def log_log_svg(xs, series, title="", xlabel="", ylabel="") -> str:
    """Render one polyline per series against common x values.

    xs is a list of positive x values; series maps label -> list of y values
    (same length as xs, nonpositive entries skipped).
    """
    points = {}
    for label, ys in series.items():
        pts = [(math.log10(x), math.log10(y))
               for x, y in zip(xs, ys) if x > 0.0 and y > 0.0]
        if pts:
            points[label] = pts
    if not points:
        raise ValueError("nothing to plot: no positive data")
    all_x = [p[0] for pts in points.values() for p in pts]
    all_y = [p[1] for pts in points.values() for p in pts]
    x0, x1 = math.floor(min(all_x)), math.ceil(max(all_x))
    y0, y1 = math.floor(min(all_y)), math.ceil(max(all_y))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    px = lambda lx: _ML + (lx - x0) / (x1 - x0) * (_W - _ML - _MR)
    py = lambda ly: _H - _MB - (ly - y0) / (y1 - y0) * (_H - _MT - _MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{_W // 2}" y="28" text-anchor="middle" '
           f'font-family="sans-serif" font-size="16">{title}</text>']
    # decade gridlines
    for k in range(x0, x1 + 1):
        x = px(k)
        out.append(f'<line x1="{_fmt(x)}" y1="{_MT}" x2="{_fmt(x)}" y2="{_H - _MB}" '
                   f'stroke="#dddddd" stroke-dasharray="3,3"/>')
        out.append(f'<text x="{_fmt(x)}" y="{_H - _MB + 22}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">1e{k}</text>')
    for k in range(y0, y1 + 1):
        y = py(k)
        out.append(f'<line x1="{_ML}" y1="{_fmt(y)}" x2="{_W - _MR}" y2="{_fmt(y)}" '
                   f'stroke="#dddddd" stroke-dasharray="3,3"/>')
        out.append(f'<text x="{_ML - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="12">1e{k}</text>')
    out.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
               f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>')
    out.append(f'<text x="{(_ML + _W - _MR) // 2}" y="{_H - 18}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="14">{xlabel}</text>')
    out.append(f'<text x="24" y="{(_MT + _H - _MB) // 2}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="14" '
               f'transform="rotate(-90 24 {(_MT + _H - _MB) // 2})">{ylabel}</text>')
    for i, (label, pts) in enumerate(points.items()):
        color = _PALETTE[i % len(_PALETTE)]
        path = " ".join(f"{_fmt(px(lx))},{_fmt(py(ly))}" for lx, ly in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                   f'stroke-width="1.8"/>')
        for lx, ly in pts:
            out.append(f'<circle cx="{_fmt(px(lx))}" cy="{_fmt(py(ly))}" r="3" '
                       f'fill="{color}"/>')
        ly0 = _MT + 18 + 20 * i
        out.append(f'<line x1="{_W - _MR + 12}" y1="{ly0 - 4}" x2="{_W - _MR + 40}" '
                   f'y2="{ly0 - 4}" stroke="{color}" stroke-width="1.8"/>')
        out.append(f'<text x="{_W - _MR + 46}" y="{ly0}" font-family="sans-serif" '
                   f'font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
