"""Minimal static SVG line plots and histograms."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 640, 400
L, R, T, B = 70, 150, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _scale(lo, hi, a, b):
    if hi == lo:
        hi = lo + 1.0
    return lambda v: a + (v - lo) / (hi - lo) * (b - a)


def _frame(title, xlabel, ylabel, x0, x1, y0, y1, sx, sy) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
        f'<text x="{(L + W - R) / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{(T + H - B) / 2}" text-anchor="middle" transform="rotate(-90 16 {(T + H - B) / 2})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{H - B + 15}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{L - 5}" y="{sy(yv) + 4:.1f}" text-anchor="end">{_fmt(yv)}</text>')
    return out


def line_plot(series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """``series`` maps a legend label to ``(xs, ys)``; non-finite points are skipped."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    sx = _scale(x0, x1, L, W - R)
    sy = _scale(y0, y1, H - B, T)
    out = _frame(title, xlabel, ylabel, x0, x1, y0, y1, sx, sy)
    for i, (name, (xs, ys)) in enumerate(series.items()):
        c = PALETTE[i % len(PALETTE)]
        path = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)
        )
        out.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        ly = T + 14 * i
        out.append(f'<line x1="{W - R + 10}" y1="{ly}" x2="{W - R + 30}" y2="{ly}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{W - R + 35}" y="{ly + 4}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def histogram(counts, edges, title: str = "", xlabel: str = "") -> str:
    counts = [float(c) for c in counts]
    edges = [float(e) for e in edges]
    top = max(counts, default=1.0) or 1.0
    sx = _scale(edges[0], edges[-1], L, W - R)
    sy = _scale(0.0, top, H - B, T)
    out = _frame(title, xlabel, "count", edges[0], edges[-1], 0.0, top, sx, sy)
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        x, w = sx(a), max(sx(b) - sx(a) - 1, 0.5)
        out.append(f'<rect x="{x:.2f}" y="{sy(c):.2f}" width="{w:.2f}" height="{sy(0) - sy(c):.2f}" fill="{PALETTE[0]}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
