"""Minimal deterministic SVG 1.1 line charts."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 160, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, k: int = 5):
    if hi == lo:
        return [lo]
    step = (hi - lo) / (k - 1)
    return [lo + i * step for i in range(k)]


def line_chart(series: dict, xlabel: str, ylabel: str, title: str = "") -> str:
    """Render ``{name: (xs, ys)}`` as an SVG document string.

    NaN points are skipped.  The plotted numbers are repeated in a comment
    at the top so the chart doubles as a data table.
    """
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    xlo = min((p[0] for p in pts), default=0.0)
    xhi = max((p[0] for p in pts), default=1.0)
    ylo = min((p[1] for p in pts), default=0.0)
    yhi = max((p[1] for p in pts), default=1.0)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return TOP + ph - (y - ylo) / (yhi - ylo) * ph

    table = ["data:"]
    for name, (xs, ys) in series.items():
        table.append(f"  {name}: " + " ".join(f"({x!r}, {y!r})" for x, y in zip(xs, ys)))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        "<!--",
        escape("\n".join(table)).replace("--", "- -"),
        "-->",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(xlo, xhi):
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{TOP + ph}" x2="{_fmt(sx(t))}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{_fmt(sx(t))}" y="{TOP + ph + 18}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{t:.3g}</text>'
        )
    for t in _ticks(ylo, yhi):
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(sy(t))}" x2="{LEFT}" y2="{_fmt(sy(t))}" stroke="black"/>')
        out.append(
            f'<text x="{LEFT - 8}" y="{_fmt(sy(t) + 4)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{t:.3g}</text>'
        )
    out.append(
        f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="18" y="{TOP + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for k, (name, (xs, ys)) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        good = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        if good:
            path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in good)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            for x, y in good:
                out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        ly = TOP + 16 + 18 * k
        out.append(f'<line x1="{WIDTH - RIGHT + 12}" y1="{ly}" x2="{WIDTH - RIGHT + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(
            f'<text x="{WIDTH - RIGHT + 38}" y="{ly + 4}" font-family="sans-serif" font-size="12">{escape(str(name))}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path, series: dict, xlabel: str, ylabel: str, title: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(line_chart(series, xlabel, ylabel, title))
