"""Static SVG 1.1 plots: current quiver map, trajectory overlays, Pareto fronts."""

from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .environment import EnvironmentSpec, current_components

WIDTH = HEIGHT = 600
MARGIN = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _header(width: int, height: int, title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f"<title>{escape(title)}</title>",
        '<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" '
        'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#555"/></marker></defs>',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]


class _Frame:
    def __init__(self, x_lo, x_hi, y_lo, y_hi, width=WIDTH, height=HEIGHT):
        self.x_lo, self.x_hi, self.y_lo, self.y_hi = x_lo, x_hi, y_lo, y_hi
        self.sx = (width - 2 * MARGIN) / (x_hi - x_lo)
        self.sy = (height - 2 * MARGIN) / (y_hi - y_lo)
        self.height = height

    def __call__(self, x, y):
        return (MARGIN + (x - self.x_lo) * self.sx,
                self.height - MARGIN - (y - self.y_lo) * self.sy)


def _f(v: float) -> str:
    return f"{v:.2f}"


def _map_layers(env: EnvironmentSpec, grid: int) -> tuple[list[str], _Frame]:
    b = env.bounds
    fr = _Frame(b.x1_min, b.x1_max, b.x2_min, b.x2_max)
    out = []
    x0, y0 = fr(b.x1_min, b.x2_max)
    x1, y1 = fr(b.x1_max, b.x2_min)
    out.append(f'<rect class="bounds" x="{_f(x0)}" y="{_f(y0)}" width="{_f(x1 - x0)}" '
               f'height="{_f(y1 - y0)}" fill="none" stroke="black"/>')

    # cell-centred sample points
    xs = b.x1_min + (np.arange(grid) + 0.5) * (b.x1_max - b.x1_min) / grid
    ys = b.x2_min + (np.arange(grid) + 0.5) * (b.x2_max - b.x2_min) / grid
    g1, g2 = np.meshgrid(xs, ys, indexing="ij")
    v_e, v_n = current_components(g1, g2, env.current)
    speed = np.hypot(v_e, v_n)
    top = float(speed.max())
    cell = 0.9 * min((b.x1_max - b.x1_min), (b.x2_max - b.x2_min)) / grid
    scale = cell / top if top > 0 else 0.0
    out.append('<g class="quiver" stroke="#555" stroke-width="1">')
    for i in range(grid):
        for j in range(grid):
            px, py = fr(g1[i, j], g2[i, j])
            if speed[i, j] * scale * fr.sx < 1e-6:
                out.append(f'<circle class="arrow" cx="{_f(px)}" cy="{_f(py)}" r="1" fill="#555"/>')
                continue
            qx, qy = fr(g1[i, j] + v_e[i, j] * scale, g2[i, j] + v_n[i, j] * scale)
            out.append(f'<line class="arrow" x1="{_f(px)}" y1="{_f(py)}" x2="{_f(qx)}" '
                       f'y2="{_f(qy)}" marker-end="url(#head)"/>')
    out.append("</g>")

    for port in env.ports:
        px, py = fr(*port.position)
        out.append(f'<rect class="port" x="{_f(px - 5)}" y="{_f(py - 5)}" width="10" '
                   'height="10" fill="black"/>')
    tx, ty = fr(*env.terminal.center)
    out.append(f'<circle class="terminal" cx="{_f(tx)}" cy="{_f(ty)}" '
               f'r="{_f(env.terminal.radius * fr.sx)}" fill="none" stroke="#2ca02c" '
               'stroke-width="2"/>')
    sx, sy = fr(*env.start)
    out.append(f'<circle class="start" cx="{_f(sx)}" cy="{_f(sy)}" r="5" fill="#1f77b4"/>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
               'font-size="13">x1 [km]</text>')
    out.append(f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 14 {HEIGHT / 2})">x2 [km]</text>')
    return out, fr


def map_svg(env: EnvironmentSpec, grid: int = 20,
            paths: Sequence[tuple[str, np.ndarray]] = (), title: str = "Ocean map") -> str:
    """Quiver plot of the current field with ports, start and terminal region.

    ``paths`` are (label, (K, 2) positions) overlays drawn as polylines.
    """
    out = _header(WIDTH, HEIGHT, title)
    layers, fr = _map_layers(env, grid)
    out += layers
    for i, (label, pts) in enumerate(paths):
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in (fr(*p) for p in np.asarray(pts)))
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline class="trajectory" points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="2"><title>{escape(label)}</title></polyline>')
        out.append(f'<text x="{MARGIN + 6}" y="{MARGIN + 16 + 16 * i}" fill="{color}" '
                   f'font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def pareto_svg(fronts: Sequence[tuple[str, Sequence[tuple[float, float]]]],
               title: str = "Pareto fronts") -> str:
    """One polyline per (label, [(trip_time_hr, fuel_gal), ...]) front."""
    pts = [p for _, f in fronts for p in f]
    if pts:
        t = [p[0] for p in pts]
        g = [p[1] for p in pts]
        t_lo, t_hi = min(t), max(t)
        g_lo, g_hi = min(g), max(g)
    else:
        t_lo, t_hi, g_lo, g_hi = 0.0, 1.0, 0.0, 1.0
    pad_t = max(0.05 * (t_hi - t_lo), 0.25)
    pad_g = max(0.05 * (g_hi - g_lo), 0.25)
    fr = _Frame(t_lo - pad_t, t_hi + pad_t, max(0.0, g_lo - pad_g), g_hi + pad_g)
    out = _header(WIDTH, HEIGHT, title)
    out.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
               f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>')
    for tick in np.linspace(fr.x_lo, fr.x_hi, 6):
        x, _ = fr(tick, fr.y_lo)
        out.append(f'<text x="{_f(x)}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                   f'font-size="11">{tick:.1f}</text>')
    for tick in np.linspace(fr.y_lo, fr.y_hi, 6):
        _, y = fr(fr.x_lo, tick)
        out.append(f'<text x="{MARGIN - 6}" y="{_f(y + 4)}" text-anchor="end" '
                   f'font-size="11">{tick:.1f}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
               'font-size="13">trip time [hr]</text>')
    out.append(f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 14 {HEIGHT / 2})">fuel [Gal]</text>')
    for i, (label, pts) in enumerate(fronts):
        color = PALETTE[i % len(PALETTE)]
        xy = [fr(t, g) for t, g in pts]
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in xy)
        out.append(f'<g class="front-group"><polyline class="front" points="{coords}" '
                   f'fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in xy:
            out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 6}" y="{MARGIN + 16 + 16 * i}" '
                   f'text-anchor="end" fill="{color}" font-size="12">{escape(label)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
