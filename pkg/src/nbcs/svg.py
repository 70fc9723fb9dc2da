"""SVG rendering of approximation stages.

Fixed 1000x900 canvas; the root simplex's bounding box is mapped into it
(uniform scale, y flipped so the figure is upright).
"""
from __future__ import annotations

import numpy as np

from . import approx
from .geometry import polygon_area
from .system import NestedSystem, WeightVector

CANVAS_W = 1000
CANVAS_H = 900
MARGIN = 20


def _mapper(root_coords: np.ndarray):
    lo = root_coords.min(axis=0)
    hi = root_coords.max(axis=0)
    span = hi - lo
    scale = min((CANVAS_W - 2 * MARGIN) / span[0], (CANVAS_H - 2 * MARGIN) / span[1])

    def to_px(pts):
        pts = np.atleast_2d(pts)
        x = MARGIN + (pts[:, 0] - lo[0]) * scale
        y = CANVAS_H - MARGIN - (pts[:, 1] - lo[1]) * scale
        return np.column_stack([x, y])

    return to_px


def _path(points: np.ndarray, close: bool = True) -> str:
    cmds = [f"M{points[0, 0]:.2f} {points[0, 1]:.2f}"]
    cmds += [f"L{p[0]:.2f} {p[1]:.2f}" for p in points[1:]]
    if close:
        cmds.append("Z")
    return "".join(cmds)


def render_stage(
    system: NestedSystem,
    weights: WeightVector,
    polygon: np.ndarray,
    stage: int,
) -> str:
    """One SVG document: subdivision edges, the represented region's
    positive pieces, and the target polygon outline."""
    to_px = _mapper(system.root.coords)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {CANVAS_W} {CANVAS_H}" '
        f'width="{CANVAS_W}" height="{CANVAS_H}">',
        f'<title>stage {stage}</title>',
        f'<rect width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>',
    ]
    region = []
    for leaf in system.leaves():
        pos = approx._leaf_positive_polygon(system, weights, leaf)
        if len(pos) >= 3 and polygon_area(pos) > 1e-12:
            region.append(
                f'<path d="{_path(to_px(pos))}" fill="#74c476" fill-opacity="0.55" stroke="none"/>'
            )
    parts.extend(region)
    for leaf in system.leaves():
        tri = to_px(system.node_simplex(leaf).coords)
        parts.append(
            f'<path d="{_path(tri)}" fill="none" stroke="#d62728" stroke-width="0.6"/>'
        )
    root = to_px(system.root.coords)
    parts.append(
        f'<path d="{_path(root)}" fill="none" stroke="black" stroke-width="2"/>'
    )
    parts.append(
        f'<path d="{_path(to_px(polygon))}" fill="none" stroke="#1f77b4" stroke-width="2"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts)
