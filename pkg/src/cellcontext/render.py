"""SVG rendering of layouts, hole centers and persistence diagrams."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .layout import CellLayout
from .topology import EnrichedPersistenceDiagram

PALETTE = (
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
    "#9467bd", "#8c564b", "#e377c2", "#17becf",
)
HOLE_COLOR = "#0033cc"


def class_color(class_id: int) -> str:
    return PALETTE[class_id % len(PALETTE)]


def _diagram_points(diagrams):
    """(birth, death, cx, cy, class_id) rows from diagram objects or their dicts."""
    rows = []
    for d in diagrams or []:
        if isinstance(d, EnrichedPersistenceDiagram):
            rows += [(p.birth, p.death, p.center[0], p.center[1], d.class_id) for p in d.points]
        else:
            rows += [(p["birth"], p["death"], p["center"][0], p["center"][1], d.get("class_id"))
                     for p in d.get("points", [])]
    return rows


def render_svg(layout: CellLayout, diagrams=None, size: int = 600, point_radius: float = 3.0) -> str:
    """Draw the layout, one color per class, with a legend.

    With ``diagrams``, each hole center gets a diamond marker and a
    birth-death scatter is drawn next to the layout.
    """
    pad = 20
    x0, y0, x1, y1 = layout.domain
    scale = size / max(x1 - x0, y1 - y0)
    w, h = (x1 - x0) * scale, (y1 - y0) * scale
    holes = _diagram_points(diagrams)
    inset = 220 if diagrams is not None else 0
    legend_h = 18 * max(layout.n_classes, 1) + 10
    total_w = pad * 3 + w + inset + (pad if inset else 0)
    total_h = pad * 2 + max(h, inset) + legend_h

    def to_px(x, y):
        return pad + (x - x0) * scale, pad + (y1 - y) * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0f}" height="{total_h:.0f}" '
        f'viewBox="0 0 {total_w:.0f} {total_h:.0f}">',
        f'<rect class="domain" x="{pad}" y="{pad}" width="{w:.2f}" height="{h:.2f}" '
        'fill="white" stroke="#444" stroke-width="1"/>',
        '<g class="cells">',
    ]
    for (x, y), c in zip(layout.xy, layout.labels):
        px, py = to_px(x, y)
        out.append(f'<circle class="cell c{c}" cx="{px:.2f}" cy="{py:.2f}" r="{point_radius}" fill="{class_color(c)}"/>')
    out.append("</g>")

    if holes:
        out.append('<g class="holes">')
        s = point_radius * 1.6
        for _, _, cx, cy, _ in holes:
            px, py = to_px(cx, cy)
            out.append(
                f'<path class="hole-center" d="M{px:.2f},{py - s:.2f} L{px + s:.2f},{py:.2f} '
                f'L{px:.2f},{py + s:.2f} L{px - s:.2f},{py:.2f} Z" fill="{HOLE_COLOR}"/>'
            )
        out.append("</g>")

    if inset:
        out.append(_inset(holes, pad * 2 + w, pad, inset - 20))

    ly = pad * 2 + max(h, inset)
    out.append('<g class="legend" font-family="sans-serif" font-size="12">')
    for c, name in enumerate(layout.class_names):
        yy = ly + 18 * c
        out.append(f'<rect class="swatch" x="{pad}" y="{yy:.0f}" width="12" height="12" fill="{class_color(c)}"/>')
        out.append(f'<text x="{pad + 18}" y="{yy + 11:.0f}">{escape(name)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _inset(holes, ox, oy, side) -> str:
    """Birth (x) vs death (y) scatter with the diagonal."""
    parts = [f'<g class="pd-inset" transform="translate({ox:.2f},{oy:.2f})">',
             f'<rect x="0" y="0" width="{side}" height="{side}" fill="none" stroke="#888"/>',
             f'<line class="diagonal" x1="0" y1="{side}" x2="{side}" y2="0" stroke="#bbb"/>']
    if holes:
        hi = max(max(b, d) for b, d, *_ in holes)
        hi = hi if hi > 0 else 1.0
        for b, d, _, _, c in holes:
            px, py = b / hi * side, side - d / hi * side
            color = HOLE_COLOR if c is None else class_color(int(c))
            parts.append(f'<circle class="pd-point" cx="{px:.2f}" cy="{py:.2f}" r="3" fill="{color}"/>')
        parts.append(f'<text x="2" y="{side + 14}" font-family="sans-serif" font-size="10">'
                     f'birth / death, max {np.round(hi, 4)}</text>')
    parts.append("</g>")
    return "\n".join(parts)
