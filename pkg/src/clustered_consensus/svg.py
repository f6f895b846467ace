"""Minimal SVG line charts for trajectories (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")

WIDTH = 760
PANEL_HEIGHT = 300
MARGIN_LEFT = 70
MARGIN_RIGHT = 110
MARGIN_TOP = 30
MARGIN_BOTTOM = 40
MAX_POINTS = 1500


def nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _thin(n: int) -> np.ndarray:
    if n <= MAX_POINTS:
        return np.arange(n)
    idx = np.unique(np.linspace(0, n - 1, MAX_POINTS).round().astype(int))
    return idx


def _panel(parts: list[str], top: float, times, series, labels, title: str, ylabel: str):
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = top + PANEL_HEIGHT - MARGIN_BOTTOM, top + MARGIN_TOP
    tmin, tmax = float(times[0]), float(times[-1])
    finite = series[np.isfinite(series)]
    vmin = float(finite.min()) if finite.size else 0.0
    vmax = float(finite.max()) if finite.size else 1.0
    if vmax - vmin < 1e-12:
        vmin, vmax = vmin - 0.5, vmax + 0.5
    pad = 0.05 * (vmax - vmin)
    vmin, vmax = vmin - pad, vmax + pad
    tspan = tmax - tmin if tmax > tmin else 1.0

    def sx(t):
        return x0 + (t - tmin) / tspan * (x1 - x0)

    def sy(v):
        return y0 - (v - vmin) / (vmax - vmin) * (y0 - y1)

    parts.append(f'<text x="{WIDTH / 2:.0f}" y="{top + 20:.0f}" text-anchor="middle" '
                 f'font-size="14">{escape(title)}</text>')
    parts.append(f'<rect x="{x0}" y="{_fmt(y1)}" width="{x1 - x0}" height="{_fmt(y0 - y1)}" '
                 'fill="none" stroke="#333"/>')
    for t in nice_ticks(tmin, tmax):
        parts.append(f'<line x1="{_fmt(sx(t))}" y1="{_fmt(y0)}" x2="{_fmt(sx(t))}" y2="{_fmt(y0 + 5)}" stroke="#333"/>')
        parts.append(f'<text x="{_fmt(sx(t))}" y="{_fmt(y0 + 18)}" text-anchor="middle" font-size="11">{t:g}</text>')
    for v in nice_ticks(vmin, vmax):
        parts.append(f'<line x1="{x0 - 5}" y1="{_fmt(sy(v))}" x2="{x0}" y2="{_fmt(sy(v))}" stroke="#333"/>')
        parts.append(f'<text x="{x0 - 8}" y="{_fmt(sy(v) + 4)}" text-anchor="end" font-size="11">{v:g}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.0f}" y="{_fmt(y0 + 34)}" text-anchor="middle" font-size="12">t</text>')
    parts.append(f'<text x="16" y="{_fmt((y0 + y1) / 2)}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 16 {_fmt((y0 + y1) / 2)})">{escape(ylabel)}</text>')

    idx = _thin(len(times))
    for k, label in enumerate(labels):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(times[i]))},{_fmt(sy(series[i, k]))}" for i in idx
                       if math.isfinite(series[i, k]))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{pts}"/>')
        ly = y1 + 14 + 16 * k
        parts.append(f'<line x1="{x1 + 12}" y1="{_fmt(ly)}" x2="{x1 + 32}" y2="{_fmt(ly)}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x1 + 38}" y="{_fmt(ly + 4)}" font-size="11">{escape(label)}</text>')


def render(times, states, title: str = "agent states", lyapunov=None) -> str:
    """SVG with one polyline per agent; a second panel shows ``V(t)`` when given."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    panels = 2 if lyapunov is not None else 1
    height = PANEL_HEIGHT * panels
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
             f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">',
             f'<rect width="{WIDTH}" height="{height}" fill="white"/>']
    labels = [f"x{i + 1}" for i in range(states.shape[1])]
    _panel(parts, 0, times, states, labels, title, "state")
    if lyapunov is not None:
        v = np.asarray(lyapunov, dtype=float).reshape(-1, 1)
        _panel(parts, PANEL_HEIGHT, times, v, ["V"], "Lyapunov function V(t)", "V")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
