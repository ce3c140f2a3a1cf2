"""Standalone SVG line and bar charts.

Output depends only on the input values (fixed precision, no timestamps),
so identical input gives byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

from hetsim._io import atomic_write_text
from hetsim.errors import HetsimError

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 64, 150, 40, 52
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass(frozen=True)
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]
    ci: Sequence[float] | None = None


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks, t = [], start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _f(v: float) -> str:
    return f"{v:.2f}"


def _check(series: Sequence[Series]) -> None:
    if not series:
        raise HetsimError("chart needs at least one series")
    for s in series:
        if not len(s.xs) or len(s.xs) != len(s.ys):
            raise HetsimError(f"series {s.label!r}: x and y must be non-empty and of equal length")
        if s.ci is not None and len(s.ci) != len(s.ys):
            raise HetsimError(f"series {s.label!r}: ci length does not match y")


def render_svg(series: Sequence[Series], kind: str = "line", title: str = "",
               x_label: str = "", y_label: str = "") -> str:
    _check(series)
    if kind not in ("line", "bar"):
        raise HetsimError(f"unknown chart kind {kind!r}")
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM

    all_x = sorted({float(x) for s in series for x in s.xs})
    y_hi = max(float(y) + (float(s.ci[i]) if s.ci else 0.0)
               for s in series for i, y in enumerate(s.ys))
    y_lo = min(0.0, min(float(y) for s in series for y in s.ys))
    y_ticks = _nice_ticks(y_lo, y_hi)
    y_min, y_max = y_ticks[0], y_ticks[-1]

    def py(y: float) -> float:
        return TOP + plot_h * (1 - (y - y_min) / (y_max - y_min))

    if kind == "line":
        x_min, x_max = all_x[0], all_x[-1]
        if x_max == x_min:
            x_min, x_max = x_min - 1, x_max + 1

        def px(x: float) -> float:
            return LEFT + plot_w * (x - x_min) / (x_max - x_min)
    else:
        slot = plot_w / len(all_x)
        index = {x: i for i, x in enumerate(all_x)}

        def px(x: float) -> float:
            return LEFT + slot * (index[float(x)] + 0.5)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text class="title" x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    # axes
    x0, y0 = LEFT, TOP + plot_h
    out.append(f'<line class="axis" x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>')
    out.append(f'<line class="axis" x1="{x0}" y1="{y0}" x2="{LEFT + plot_w}" y2="{y0}" stroke="black"/>')
    for t in y_ticks:
        y = py(t)
        out.append(f'<line class="grid" x1="{x0}" y1="{_f(y)}" x2="{LEFT + plot_w}" y2="{_f(y)}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text class="ytick" x="{x0 - 6}" y="{_f(y + 4)}" text-anchor="end">{t:g}</text>')
    for x in all_x:
        out.append(f'<text class="xtick" x="{_f(px(x))}" y="{y0 + 16}" text-anchor="middle">{x:g}</text>')
    if x_label:
        out.append(f'<text class="xlabel" x="{LEFT + plot_w / 2:.0f}" y="{HEIGHT - 12}" '
                   f'text-anchor="middle">{escape(x_label)}</text>')
    if y_label:
        out.append(f'<text class="ylabel" x="16" y="{TOP + plot_h / 2:.0f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {TOP + plot_h / 2:.0f})">{escape(y_label)}</text>')

    bar_w = (plot_w / len(all_x)) * 0.8 / len(series) if kind == "bar" else 0.0
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        label = quoteattr(s.label)
        pts = [(px(float(x)), py(float(y))) for x, y in zip(s.xs, s.ys)]
        out.append(f'<g class="series" data-label={label}>')
        if kind == "line":
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="'
                       + " ".join(f"{_f(a)},{_f(b)}" for a, b in pts) + '"/>')
            for (a, b), x, y in zip(pts, s.xs, s.ys):
                out.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="3" fill="{color}" '
                           f'data-x="{float(x):g}" data-y="{float(y):.6g}"/>')
        else:
            for (a, b), x, y in zip(pts, s.xs, s.ys):
                left = a - bar_w * len(series) / 2 + k * bar_w
                out.append(f'<rect x="{_f(left)}" y="{_f(min(b, py(0)))}" width="{_f(bar_w)}" '
                           f'height="{_f(abs(py(0) - b))}" fill="{color}" '
                           f'data-x="{float(x):g}" data-y="{float(y):.6g}"/>')
        if s.ci is not None:
            for (a, _), y, h in zip(pts, s.ys, s.ci):
                if kind == "bar":
                    a = a - bar_w * len(series) / 2 + (k + 0.5) * bar_w
                top, bot = py(float(y) + float(h)), py(float(y) - float(h))
                out.append(f'<line class="ci" x1="{_f(a)}" y1="{_f(top)}" x2="{_f(a)}" y2="{_f(bot)}" '
                           f'stroke="{color}"/>')
        out.append("</g>")
        ly = TOP + 10 + 18 * k
        lx = LEFT + plot_w + 14
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text class="legend" x="{lx + 18}" y="{ly + 2}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_chart(series: Sequence[Series], kind: str, out: str | Path, **labels: str) -> Path:
    """Render ``series`` and write the SVG atomically to ``out``."""
    text = render_svg(series, kind, **labels)
    return atomic_write_text(out, text)
