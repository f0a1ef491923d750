"""SVG annotation of a measured image: contours, CRL line, landmarks and angles.

The viewBox is shifted by half a pixel so that pixel ``(x, y)`` is centred on
SVG user coordinate ``(x, y)``; landmark coordinates are written unchanged.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .criteria import CriteriaConfig, ScoreCard, caliper_box
from .geometry import Measurement, perpendicular_foot
from .mask_io import BODY, HEAD, PALATE

CLASS_COLORS = {HEAD: "#1f77b4", BODY: "#2ca02c", PALATE: "#d62728"}
_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1))


def _num(v) -> str:
    if float(v).is_integer():
        return str(int(v))
    return f"{float(v):.3f}"


def chain_pixels(points: np.ndarray) -> list:
    """Split a boundary pixel set into 8-connected chains for drawing.

    Walks greedily from the smallest unvisited pixel, preferring 4-neighbours.
    Every pixel lands in exactly one chain.
    """
    remaining = {(int(x), int(y)) for x, y in points}
    chains = []
    while remaining:
        current = min(remaining)
        remaining.remove(current)
        chain = [current]
        while True:
            x, y = current
            for dx, dy in _STEPS:
                nxt = (x + dx, y + dy)
                if nxt in remaining:
                    remaining.remove(nxt)
                    chain.append(nxt)
                    current = nxt
                    break
            else:
                break
        chains.append(chain)
    return chains


def _polyline(chain, color, label) -> str:
    if len(chain) == 1:
        x, y = chain[0]
        return f'<circle class="contour" data-class="{label}" cx="{x}" cy="{y}" r="0.5" fill="{color}"/>'
    pts = " ".join(f"{x},{y}" for x, y in chain)
    return (
        f'<polyline class="contour" data-class="{label}" points="{pts}" '
        f'fill="none" stroke="{color}" stroke-width="1"/>'
    )


def _text(x, y, body, cls, anchor="start") -> str:
    return (
        f'<text class="{cls}" x="{_num(x)}" y="{_num(y)}" font-size="14" '
        f'font-family="sans-serif" fill="#ffd92f" text-anchor="{anchor}">{escape(body)}</text>'
    )


def render_svg(
    measurement: Measurement,
    card: ScoreCard,
    width: int,
    height: int,
    cfg: CriteriaConfig | None = None,
) -> str:
    """Build the overlay document for one scored image."""
    cfg = cfg or CriteriaConfig()
    lm = measurement.landmarks
    ax, ay = lm.crown_A
    bx, by = lm.rump_B
    cx, cy = lm.junction_C
    fx, fy = perpendicular_foot(lm.crown_A, lm.rump_B, lm.junction_C)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="-0.5 -0.5 {width} {height}">',
        f"<title>{escape(card.image_id)}</title>",
        f'<rect x="-0.5" y="-0.5" width="{width}" height="{height}" fill="#000000"/>',
        '<g id="contours">',
    ]
    for label in sorted(measurement.contours):
        contour = measurement.contours[label]
        color = CLASS_COLORS.get(label, "#ffffff")
        for chain in chain_pixels(contour.points):
            out.append(_polyline(chain, color, label))
    out.append("</g>")

    # Horizontal reference through the left endpoint, against which alpha is read.
    left_x, left_y = (ax, ay) if ax <= bx else (bx, by)
    span = abs(bx - ax)
    out.append(
        f'<line class="horizontal-ref" x1="{_num(left_x)}" y1="{_num(left_y)}" '
        f'x2="{_num(left_x + span)}" y2="{_num(left_y)}" stroke="#aaaaaa" '
        f'stroke-width="1" stroke-dasharray="4 3"/>'
    )
    out.append(
        f'<line id="crl" class="crl-line" x1="{_num(ax)}" y1="{_num(ay)}" '
        f'x2="{_num(bx)}" y2="{_num(by)}" stroke="#1f9dff" stroke-width="2"/>'
    )
    out.append(
        f'<line class="perpendicular" x1="{_num(cx)}" y1="{_num(cy)}" '
        f'x2="{_num(fx)}" y2="{_num(fy)}" stroke="#ffffff" stroke-width="1" '
        f'stroke-dasharray="2 2"/>'
    )

    ends = sorted([(ax, ay), (bx, by)])
    for side, (ex, ey), other, ok in (
        ("left", ends[0], ends[1], card.c5_left_caliper),
        ("right", ends[1], ends[0], card.c6_right_caliper),
    ):
        x0, x1, y0, y1 = caliper_box((ex, ey), (ex - other[0], ey - other[1]), cfg)
        color = "#00cc66" if ok else "#ff3333"
        out.append(
            f'<rect class="caliper-box" data-side="{side}" x="{x0 - 0.5}" y="{y0 - 0.5}" '
            f'width="{x1 - x0}" height="{y1 - y0}" fill="none" stroke="{color}" stroke-width="1"/>'
        )

    for name, (px, py) in (("A", lm.crown_A), ("B", lm.rump_B), ("C", lm.junction_C)):
        out.append(
            f'<g class="landmark" id="point-{name}">'
            f'<circle cx="{_num(px)}" cy="{_num(py)}" r="3" fill="#ff7f0e"/>'
            + _text(px + 5, py - 5, name, "landmark-label")
            + "</g>"
        )

    mx, my = (ax + bx) / 2.0, (ay + by) / 2.0
    out.append(_text(mx, my - 10, f"alpha = {lm.alpha_deg:.1f}°", "angle-label alpha"))
    # Put the beta label on the far side of C from the CRL line.
    nx, ny = cx - fx, cy - fy
    norm = math.hypot(nx, ny) or 1.0
    out.append(
        _text(cx + 18 * nx / norm, cy + 18 * ny / norm + 5,
              f"beta = {lm.beta_deg:.1f}°", "angle-label beta", anchor="middle")
    )
    out.append(
        _text(4, height - 8, f"score {card.score}/7, "
              f"{'acceptable' if card.acceptable else 'not acceptable'}", "summary")
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
