"""Step-style ECDF chart as a self-contained SVG string."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .ecdf import Ecdf
from .errors import EmptySample

WIDTH, HEIGHT = 760, 460
MARGIN = dict(left=70, right=190, top=30, bottom=60)
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
MAX_POINTS = 1500


def _nice_step(span: float, target: int = 6) -> float:
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 2.5, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _thin(xs: np.ndarray, fs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # keep the plot small for large samples: evenly spaced steps by rank
    if len(xs) <= MAX_POINTS:
        return xs, fs
    idx = np.unique(np.round(np.linspace(0, len(xs) - 1, MAX_POINTS)).astype(int))
    return xs[idx], fs[idx]


def plot_ecdf_svg(
    curves: Sequence[tuple[str, Ecdf]],
    title: str = "ECDF of distances",
    allow_empty: bool = False,
) -> str:
    """One step polyline per labelled curve, with axes and legend."""
    if not curves and not allow_empty:
        raise EmptySample("nothing to plot")
    x_hi = max((float(c.values[-1]) for _, c in curves), default=1.0)
    x_hi = max(x_hi, 1.0) * 1.05
    step = _nice_step(x_hi)
    x_hi = math.ceil(x_hi / step) * step
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x: float) -> float:
        return MARGIN["left"] + pw * x / x_hi

    def sy(f: float) -> float:
        return MARGIN["top"] + ph * (1.0 - f)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    # grid and ticks
    n_x = int(round(x_hi / step))
    for k in range(n_x + 1):
        x = k * step
        px = sx(x)
        out.append(f'<line x1="{px:.1f}" y1="{sy(0):.1f}" x2="{px:.1f}" y2="{sy(1):.1f}" stroke="#e6e6e6"/>')
        out.append(f'<text x="{px:.1f}" y="{sy(0) + 16:.1f}" text-anchor="middle">{_fmt(x)}</text>')
    for k in range(6):
        f = k / 5
        py = sy(f)
        out.append(f'<line x1="{sx(0):.1f}" y1="{py:.1f}" x2="{sx(x_hi):.1f}" y2="{py:.1f}" stroke="#e6e6e6"/>')
        out.append(f'<text x="{sx(0) - 8:.1f}" y="{py + 4:.1f}" text-anchor="end">{_fmt(f)}</text>')
    out.append(
        f'<rect x="{sx(0):.1f}" y="{sy(1):.1f}" width="{pw:.1f}" height="{ph:.1f}" fill="none" stroke="black"/>'
    )
    out.append(f'<text x="{sx(x_hi / 2):.1f}" y="{HEIGHT - 18}" text-anchor="middle">distance [m]</text>')
    cy = MARGIN["top"] + ph / 2
    out.append(
        f'<text x="20" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 20 {cy:.1f})">fraction [-]</text>'
    )

    for i, (label, ecdf) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        xs, fs = _thin(*ecdf.steps())
        pts = [(sx(xs[0]), sy(0.0))]
        prev = 0.0
        for x, f in zip(xs.tolist(), fs.tolist()):
            pts.append((sx(x), sy(prev)))
            pts.append((sx(x), sy(f)))
            prev = f
        pts.append((sx(x_hi), sy(prev)))
        # drop repeated vertices (the first step starts where the curve does)
        dedup = [pts[0]] + [p for a, p in zip(pts, pts[1:]) if p != a]
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in dedup)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = MARGIN["top"] + 10 + 20 * i
        lx = WIDTH - MARGIN["right"] + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}">{escape(label)} (n={len(ecdf)})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
