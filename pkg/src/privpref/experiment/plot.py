"""Render sweep results as a standalone SVG: one log-log panel per epsilon."""

import math
from collections import defaultdict
from xml.sax.saxutils import escape

import numpy as np

from .sweep import read_records_csv

__all__ = ["aggregate", "emit_svg", "render_svg"]

PANEL_W, PANEL_H = 360, 300
MARGIN = dict(left=64, right=16, top=36, bottom=48)
LEGEND_H = 28
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def aggregate(records):
    """Mean and standard deviation of the l2 error per ``(estimator, epsilon, n)``."""
    groups = defaultdict(list)
    for r in records:
        groups[(r.estimator, r.epsilon, r.n)].append(r.l2_error)
    return {k: (float(np.mean(v)), float(np.std(v)), len(v)) for k, v in groups.items()}


def _log_range(values):
    lo, hi = math.log10(min(values)), math.log10(max(values))
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo, hi):
    ticks = [k for k in range(math.floor(lo), math.ceil(hi) + 1) if lo <= k <= hi]
    if len(ticks) < 2:
        ticks = sorted({lo, hi})
    return ticks


def render_svg(records, title="l2 estimation error"):
    stats = aggregate(records)
    if not stats:
        raise ValueError("no data rows to plot")
    estimators = sorted({k[0] for k in stats})
    epsilons = sorted({k[1] for k in stats})
    color = {e: COLORS[i % len(COLORS)] for i, e in enumerate(estimators)}
    xlo, xhi = _log_range([k[2] for k in stats])
    width = PANEL_W * len(epsilons)
    height = PANEL_H + LEGEND_H
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f"<title>{escape(title)}</title>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    pw = PANEL_W - MARGIN["left"] - MARGIN["right"]
    ph = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
    for p, eps in enumerate(epsilons):
        ox, oy = p * PANEL_W + MARGIN["left"], MARGIN["top"]
        ys = [m for (est, e, n), (m, _, _) in stats.items() if e == eps and m > 0]
        ylo, yhi = _log_range(ys or [1.0])

        def sx(n, ox=ox):
            return ox + pw * (math.log10(n) - xlo) / (xhi - xlo)

        def sy(v, oy=oy, ylo=ylo, yhi=yhi):
            return oy + ph * (1.0 - (math.log10(v) - ylo) / (yhi - ylo))

        out.append(f'<g class="panel" data-epsilon="{eps!r}">')
        out.append(f'<rect x="{ox}" y="{oy}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
        out.append(
            f'<text x="{ox + pw / 2:.1f}" y="{oy - 12}" text-anchor="middle" font-size="13">'
            f"epsilon = {eps:g}</text>"
        )
        for k in _ticks(xlo, xhi):
            x = ox + pw * (k - xlo) / (xhi - xlo)
            out.append(f'<line x1="{x:.1f}" y1="{oy + ph}" x2="{x:.1f}" y2="{oy + ph + 4}" stroke="#444"/>')
            out.append(f'<text x="{x:.1f}" y="{oy + ph + 16}" text-anchor="middle">{10 ** k:g}</text>')
        for k in _ticks(ylo, yhi):
            y = oy + ph * (1.0 - (k - ylo) / (yhi - ylo))
            out.append(f'<line x1="{ox - 4}" y1="{y:.1f}" x2="{ox}" y2="{y:.1f}" stroke="#444"/>')
            out.append(f'<text x="{ox - 6}" y="{y + 4:.1f}" text-anchor="end">{10 ** k:.3g}</text>')
        out.append(
            f'<text x="{ox + pw / 2:.1f}" y="{oy + ph + 34}" text-anchor="middle">n (samples)</text>'
        )
        for est in estimators:
            pts = sorted((n, m) for (e_, e, n), (m, _, _) in stats.items() if e_ == est and e == eps and m > 0)
            if not pts:
                continue
            coords = " ".join(f"{sx(n):.2f},{sy(m):.2f}" for n, m in pts)
            out.append(
                f'<polyline class="series" data-estimator="{escape(est)}" points="{coords}" '
                f'fill="none" stroke="{color[est]}" stroke-width="1.6"/>'
            )
            for n, m in pts:
                out.append(
                    f'<circle class="marker" data-estimator="{escape(est)}" cx="{sx(n):.2f}" '
                    f'cy="{sy(m):.2f}" r="3" fill="{color[est]}"/>'
                )
        out.append("</g>")
    lx = MARGIN["left"]
    ly = PANEL_H + LEGEND_H / 2
    for est in estimators:
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color[est]}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 22}" y="{ly + 4}">{escape(est)}</text>')
        lx += 30 + 7 * len(est)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(csv_path, out_path, title="l2 estimation error"):
    """Plot mean l2 error against n for each estimator, one panel per epsilon.

    Nothing is written if the CSV is malformed or has no data rows.
    """
    svg = render_svg(read_records_csv(csv_path), title)
    with open(out_path, "w") as fh:
        fh.write(svg)
    return out_path
