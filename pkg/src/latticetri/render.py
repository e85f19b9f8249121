"""SVG rendering of triangulations with optional analysis overlays."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .geometry import EdgeOrientation, orientation
from .triangulation import Triangulation

SLOPE_COLORS = {
    EdgeOrientation.POSITIVE: "#c0392b",  # red family
    EdgeOrientation.NEGATIVE: "#2455a4",  # blue family
    EdgeOrientation.AXIS: "#222222",
}


@dataclass
class Overlays:
    b_shading: Optional[object] = None      # BTriangleDecomposition
    influence: Optional[object] = None      # InfluenceRegion
    bold_constraints: bool = True
    slope_coloring: bool = False


def render_svg(t: Triangulation, overlays: Optional[Overlays] = None,
               scale: int = 24, margin: int = 12) -> str:
    """One <line> element per edge; overlays render as filled polygons
    underneath.  Vertical coordinates increase upward (SVG y is flipped)."""
    ov = overlays or Overlays()
    grid = t.grid
    width = grid.n * scale + 2 * margin
    height = grid.m * scale + 2 * margin

    def xy(p):
        return (margin + p.h * scale, margin + (grid.m - p.v) * scale)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]

    def polygon(tri, fill, opacity):
        pts = " ".join(f"{x},{y}" for x, y in (xy(p) for p in tri))
        parts.append(f'<polygon points="{pts}" fill="{fill}" '
                     f'fill-opacity="{opacity}" stroke="none"/>')

    if ov.b_shading is not None:
        for tri in sorted(ov.b_shading.b_triangles):
            polygon(tri, "#bbbbbb", 0.8)
    if ov.influence is not None:
        for tri in sorted(ov.influence.triangles):
            polygon(tri, "#f1a208", 0.55)

    constrained = set()
    if ov.bold_constraints:
        constrained = {e.key() for e in t.constraints.edges()}
    for e in t.edges():
        x1, y1 = xy(e.p)
        x2, y2 = xy(e.q)
        color = SLOPE_COLORS[orientation(e)] if ov.slope_coloring else "#222222"
        width_px = 3.0 if e.key() in constrained else 1.2
        parts.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                     f'stroke="{color}" stroke-width="{width_px}" '
                     f'stroke-linecap="round"/>')
    parts.append("</svg>")
    return "\n".join(parts)
