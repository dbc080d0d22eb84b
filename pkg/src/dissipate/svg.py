"""Minimal SVG line plots (time against one or more channels)."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#17becf")


def _ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    step = 10.0 ** np.floor(np.log10((hi - lo) / count))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (mult * step) <= count:
            step *= mult
            break
    return np.arange(np.ceil(lo / step) * step, hi + 0.5 * step, step)


def line_plot(series: Sequence[tuple[str, np.ndarray, np.ndarray]], title: str = "",
              xlabel: str = "t", width: int = 720, height: int = 420, max_points: int = 2000) -> str:
    """Render ``(label, t, values)`` series as a standalone SVG document.

    Long series are decimated to ``max_points`` samples; NaN samples break
    the polyline.
    """
    pad_l, pad_r, pad_t, pad_b = 60, 150, 30, 40
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    finite = [v[np.isfinite(v)] for _, _, v in series]
    ts = [t for _, t, _ in series]
    x0 = min((float(t[0]) for t in ts if t.size), default=0.0)
    x1 = max((float(t[-1]) for t in ts if t.size), default=1.0)
    y0 = min((float(v.min()) for v in finite if v.size), default=-1.0)
    y1 = max((float(v.max()) for v in finite if v.size), default=1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1.0, y1 + 1.0

    def sx(v):
        return pad_l + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return pad_t + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    if title:
        out.append(f'<text x="{pad_l + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for v in _ticks(x0, x1):
        out.append(f'<line x1="{sx(v):.2f}" y1="{pad_t + ph}" x2="{sx(v):.2f}" y2="{pad_t + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{pad_t + ph + 16}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<line x1="{pad_l - 4}" y1="{sy(v):.2f}" x2="{pad_l + pw}" y2="{sy(v):.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{pad_l - 6}" y="{sy(v) + 4:.2f}" text-anchor="end">{v:g}</text>')
    out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">{escape(xlabel)}</text>')
    for k, (label, t, v) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        stride = max(1, int(np.ceil(t.size / max_points)))
        idx = np.arange(0, t.size, stride)
        if t.size and idx[-1] != t.size - 1:
            idx = np.append(idx, t.size - 1)
        segs, cur = [], []
        for i in idx:
            if np.isfinite(v[i]):
                cur.append(f"{sx(t[i]):.2f},{sy(v[i]):.2f}")
            elif cur:
                segs.append(cur)
                cur = []
        if cur:
            segs.append(cur)
        for seg in segs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{" ".join(seg)}"/>')
        ly = pad_t + 14 * k + 8
        out.append(f'<line x1="{pad_l + pw + 10}" y1="{ly}" x2="{pad_l + pw + 28}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{pad_l + pw + 32}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trajectory_plot(trajectories: Mapping[str, object], channel: str = "x", title: str = "") -> str:
    """Plot every column of ``channel`` for each named trajectory."""
    series = []
    for name, tr in trajectories.items():
        arr = getattr(tr, channel)
        for j in range(arr.shape[1]):
            series.append((f"{name} {channel}{j + 1}", tr.t, arr[:, j]))
    return line_plot(series, title)
