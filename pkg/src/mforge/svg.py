"""Minimal deterministic SVG line and bar charts."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(k) for k in range(a, b + 1)]
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= 6:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v, log):
    return f"1e{int(v)}" if log else f"{v:.4g}"


def line_chart(series, title="", xlabel="", ylabel="", logx=False, logy=False) -> str:
    """``series``: iterable of ``(label, xs, ys)``; non-positive values are
    dropped on log axes."""
    pts = []
    for label, xs, ys in series:
        pairs = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        if logx:
            pairs = [(math.log10(x), y) for x, y in pairs if x > 0]
        if logy:
            pairs = [(x, math.log10(y)) for x, y in pairs if y > 0]
        pts.append((label, pairs))
    allx = [p[0] for _, ps in pts for p in ps] or [0.0, 1.0]
    ally = [p[1] for _, ps in pts for p in ps] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    sx = lambda x: ML + (x - x0) / (x1 - x0) * (W - ML - MR)
    sy = lambda y: H - MB - (y - y0) / (y1 - y0) * (H - MT - MB)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
        f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1, logx):
        if x0 <= t <= x1:
            out.append(f'<text x="{sx(t):.1f}" y="{H - MB + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{_fmt(t, logx)}</text>')
    for t in _ticks(y0, y1, logy):
        if y0 <= t <= y1:
            out.append(f'<text x="{ML - 6}" y="{sy(t) + 3:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{_fmt(t, logy)}</text>')
            out.append(f'<line x1="{ML}" y1="{sy(t):.1f}" x2="{W - MR}" y2="{sy(t):.1f}" stroke="#ddd"/>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{H / 2:.1f}" transform="rotate(-90 16 {H / 2:.1f})" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(ylabel)}</text>')
    for k, (label, ps) in enumerate(pts):
        c = COLORS[k % len(COLORS)]
        if ps:
            d = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in ps)
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{d}"/>')
        out.append(f'<text x="{W - MR - 4}" y="{MT + 14 * (k + 1)}" text-anchor="end" fill="{c}" font-family="sans-serif" font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(edges, counts, title="", xlabel="", ylabel="count") -> str:
    n = len(counts)
    top = max(max(counts), 1)
    sx = lambda x: ML + (x - edges[0]) / (edges[-1] - edges[0]) * (W - ML - MR)
    sy = lambda y: H - MB - y / top * (H - MT - MB)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]
    for k in range(n):
        x, x2 = sx(edges[k]), sx(edges[k + 1])
        out.append(f'<rect x="{x:.2f}" y="{sy(counts[k]):.2f}" width="{max(x2 - x - 1, 0.5):.2f}" height="{H - MB - sy(counts[k]):.2f}" fill="{COLORS[0]}"/>')
    for t in _ticks(edges[0], edges[-1], False):
        out.append(f'<text x="{sx(t):.1f}" y="{H - MB + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{t:.3g}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="{ML - 6}" y="{MT + 4}" text-anchor="end" font-family="sans-serif" font-size="10">{top}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
