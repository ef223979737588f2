"""Standalone SVG convergence chart (no plotting backend needed)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidParameterError
from .experiments import RiskReport

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
TINY = 1e-300


def _f(v: float) -> str:
    return f"{v:.3f}"


def _floor(value: float, half_width: float) -> tuple[float, bool]:
    """Values at or below the Monte Carlo noise floor are clamped up to it."""
    floor = half_width if half_width > 0 else TINY
    if value <= floor:
        return floor, True
    return value, False


def convergence_svg(report: RiskReport) -> str:
    """Log-log chart: log2 n against log10 excess risk, one polyline per estimator.

    Excess risks not above their Monte Carlo half-width cannot be told apart
    from zero; they are drawn at the half-width as hollow markers and counted
    in the legend.
    """
    rows = [r for r in report.rows if r.excess_risk is not None]
    ns = sorted({r.n for r in rows})
    if len(ns) < 2:
        raise InvalidParameterError("a convergence chart needs excess risks for at least 2 distinct n")
    estimators = sorted({r.estimator for r in rows})

    series = {}
    seed_pts = []
    for est in estimators:
        line = []
        for n in ns:
            sel = [r for r in rows if r.estimator == est and r.n == n]
            if not sel:
                continue
            med = float(np.median([r.excess_risk for r in sel]))
            hw = float(np.median([r.mc_half_width for r in sel]))
            val, clamped = _floor(med, hw)
            line.append((n, math.log10(val), clamped))
            for r in sel:
                v, c = _floor(r.excess_risk, r.mc_half_width)
                seed_pts.append((est, n, math.log10(v), c))
        series[est] = line

    ys = [p[2] for p in seed_pts] + [p[1] for line in series.values() for p in line]
    y_lo, y_hi = math.floor(min(ys)), math.ceil(max(ys))
    if y_hi == y_lo:
        y_hi += 1
    x_lo, x_hi = math.log2(ns[0]), math.log2(ns[-1])
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(n):
        return LEFT + (math.log2(n) - x_lo) / (x_hi - x_lo) * pw

    def sy(ly):
        return TOP + (y_hi - ly) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for n in ns:
        x = _f(sx(n))
        out.append(f'<line x1="{x}" y1="{TOP + ph}" x2="{x}" y2="{TOP + ph + 4}" stroke="#333"/>')
        out.append(f'<text x="{x}" y="{TOP + ph + 16}" text-anchor="middle">{n}</text>')
    for d in range(y_lo, y_hi + 1):
        y = _f(sy(d))
        out.append(f'<line x1="{LEFT - 4}" y1="{y}" x2="{LEFT + pw}" y2="{y}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{d}</text>')
    out.append(
        f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">n (log2 scale)</text>'
    )
    out.append(
        f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">median excess risk (log10 scale)</text>'
    )

    for i, est in enumerate(estimators):
        color = PALETTE[i % len(PALETTE)]
        for e, n, ly, clamped in seed_pts:
            if e != est:
                continue
            fill = "none" if clamped else color
            out.append(
                f'<circle class="seed" cx="{_f(sx(n))}" cy="{_f(sy(ly))}" r="2" '
                f'fill="{fill}" stroke="{color}" stroke-opacity="0.5" fill-opacity="0.4"/>'
            )
        pts = " ".join(f"{_f(sx(n))},{_f(sy(ly))}" for n, ly, _ in series[est])
        out.append(
            f'<polyline class="median" data-estimator="{escape(est)}" points="{pts}" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
        n_clamped = sum(c for *_, c in series[est])
        ly = TOP + 14 + 18 * i
        label = escape(est) + (f" ({n_clamped} clamped)" if n_clamped else "")
        out.append(
            f'<line x1="{WIDTH - RIGHT + 10}" y1="{ly}" x2="{WIDTH - RIGHT + 30}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{WIDTH - RIGHT + 35}" y="{ly}" dominant-baseline="middle">{label}</text>')
    out.append(
        f'<text x="{WIDTH - RIGHT + 10}" y="{TOP + 18 + 18 * len(estimators)}" fill="#666">'
        "hollow: at MC floor</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
