"""Minimal standalone SVG line chart."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH = 800
HEIGHT = 600
MARGIN = {"left": 90, "right": 30, "top": 40, "bottom": 70}


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _range(values) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def line_chart(xs, ys, x_label: str, y_label: str, title: str | None = None) -> str:
    """Render ``(xs, ys)`` as an 800x600 SVG document with linear axes."""
    if len(xs) != len(ys) or not xs:
        raise ValueError("need equally many x and y values, at least one")
    x0, x1 = _range(xs)
    y0, y1 = _range(ys)
    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" style="fill:#ffffff"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
        'style="fill:none;stroke:#000000;stroke-width:1"/>',
    ]
    for t in _nice_ticks(x0, x1):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 6}" '
                   'style="stroke:#000000;stroke-width:1"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 22}" '
                   f'style="font-family:sans-serif;font-size:12px;text-anchor:middle">{t:.6g}</text>')
    for t in _nice_ticks(y0, y1):
        y = py(t)
        out.append(f'<line x1="{left - 6}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" '
                   'style="stroke:#000000;stroke-width:1"/>')
        out.append(f'<text x="{left - 10}" y="{y + 4:.2f}" '
                   f'style="font-family:sans-serif;font-size:12px;text-anchor:end">{t:.6g}</text>')
    points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    if len(xs) > 1:
        out.append(f'<polyline points="{points}" style="fill:none;stroke:#1f77b4;stroke-width:2"/>')
    for x, y in zip(xs, ys):
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" style="fill:#1f77b4"/>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{HEIGHT - 20}" '
               f'style="font-family:sans-serif;font-size:16px;text-anchor:middle">{escape(x_label)}</text>')
    out.append(f'<text x="24" y="{top + ph / 2:.2f}" transform="rotate(-90 24 {top + ph / 2:.2f})" '
               f'style="font-family:sans-serif;font-size:16px;text-anchor:middle">{escape(y_label)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="24" '
                   f'style="font-family:sans-serif;font-size:16px;text-anchor:middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
