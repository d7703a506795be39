"""Minimal self-contained SVG line charts (axes, legend, polylines)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 420
MARGIN = dict(left=70, right=20, top=40, bottom=50)


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def line_chart(series: list, title: str, xlabel: str, ylabel: str, max_points: int = 4000) -> str:
    """Render ``[(label, xs, ys, colour), ...]`` as an SVG document string."""
    xs_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], float) for s in series])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = 0.0, float(ys_all.max()) * 1.05
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>']
    left, bottom = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{px(t):.1f}" y1="{bottom}" x2="{px(t):.1f}" y2="{bottom + 5}" stroke="black"/>')
            out.append(f'<text x="{px(t):.1f}" y="{bottom + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            out.append(f'<line x1="{left - 5}" y1="{py(t):.1f}" x2="{left}" y2="{py(t):.1f}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{py(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, (label, xs, ys, colour) in enumerate(series):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        stride = max(1, len(xs) // max_points)
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(xs[::stride], ys[::stride]))
        out.append(f'<polyline class="series" data-label="{escape(label)}" fill="none" '
                   f'stroke="{colour}" stroke-width="1" points="{pts}"/>')
        ly = MARGIN["top"] + 10 + 16 * i
        out.append(f'<line x1="{left + 12}" y1="{ly}" x2="{left + 32}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + 38}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
