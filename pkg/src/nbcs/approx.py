"""Convex-polygon approximation by staged uniform subdivision (2D exact).

Every stage splits every leaf at its barycenter.  New vertices whose parent
simplex misses the target polygon are excluded (the region there is forced
negative); all others receive the smallest weight that keeps the polygon
inside the represented region, found by maximizing a linear-fractional
ratio over the vertices of the polygon clipped to each incident child cell.
From the second stage on each weight is additionally capped at the average
of its parent's weights, which is what makes the region shrink
monotonically; the very first weight cannot be capped, since with the
all-negative initial weights the region starts empty and containment must
first be established.

Everything is exact in d = 2 (polygon clipping); higher dimensions get a
Monte-Carlo volume diagnostic only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import (
    barycentric_coords,
    clip_polygon,
    clip_polygon_by_values,
    clip_to_convex,
    ensure_ccw,
    polygon_area,
    simplex_diameter,
)
from .system import NestedSystem, WeightVector, decision_values

INITIAL_WEIGHT = -1.0
AREA_EPS = 1e-14
# clipped-polygon vertices with a smaller new-vertex coefficient impose no
# constraint on the new weight (their value is inherited from the parent)
DENOM_EPS = 1e-9


@dataclass
class ApproxConfig:
    polygon: np.ndarray
    stages: int = 4
    epsilon: float | None = None
    max_stages: int = 8

    def __post_init__(self):
        self.polygon = ensure_ccw(np.asarray(self.polygon, dtype=float))
        if polygon_area(self.polygon) <= 0:
            raise ValueError("target polygon is degenerate")
        if not _is_convex(self.polygon):
            raise ValueError("target polygon must be convex")
        if self.stages < 0 or self.max_stages < 0:
            raise ValueError("stage counts must be >= 0")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")


@dataclass
class StageMetrics:
    stage: int
    leaves: int
    max_diameter: float
    region_area: float
    excess_area: float  # area of (represented region) minus the polygon

    def excess_ratio(self, root_area: float) -> float:
        return self.excess_area / root_area


@dataclass
class ApproxResult:
    system: NestedSystem
    weights: WeightVector
    polygon: np.ndarray
    metrics: list


def _is_convex(poly: np.ndarray, tol: float = 1e-12) -> bool:
    m = len(poly)
    if m < 3:
        return False
    e = np.roll(poly, -1, axis=0) - poly
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    return bool((cross >= -tol).all())


def default_pentagon() -> np.ndarray:
    """Built-in convex pentagon, strictly inside the 2D root simplex."""
    root = geometry.regular_simplex(2)
    center = root.coords.mean(axis=0)
    r = 0.62 * geometry.regular_simplex_inradius(2)
    angles = np.deg2rad(np.array([15.0, 88.0, 160.0, 225.0, 300.0]))
    return center + r * np.column_stack([np.cos(angles), np.sin(angles)])


def minimal_weight(
    system: NestedSystem,
    star_leaf_ids,
    new_vid: int,
    polygon: np.ndarray,
    weights: WeightVector,
):
    """Smallest weight for the new vertex keeping the polygon inside the
    region, or None when the polygon misses the vertex's star entirely.

    For each incident cell the constraint is sup over the clipped polygon of
    (-sum of other-vertex contributions) / (new-vertex coefficient); the
    objective is linear-fractional, so the sup sits at a vertex of the
    clipped polygon (vertices with vanishing denominator impose no
    constraint on this weight).
    """
    best = None
    for leaf_id in star_leaf_ids:
        s = system.node_simplex(leaf_id)
        pc = clip_polygon(polygon, s)
        if len(pc) < 3 or polygon_area(pc) < AREA_EPS:
            continue
        pos = s.vertex_ids.index(new_vid)
        other_ids = np.delete(np.asarray(s.vertex_ids), pos)
        w_other = weights.values[other_ids]
        for v in pc:
            alpha = barycentric_coords(s, v)
            denom = alpha[pos]
            if denom <= DENOM_EPS:
                continue
            num = -(np.delete(alpha, pos) @ w_other)
            ratio = num / denom
            if best is None or ratio > best:
                best = ratio
    return best


def approximate(cfg: ApproxConfig, on_stage=None) -> ApproxResult:
    """Run the staged construction and return the system, weights and
    per-stage metrics (recorded from stage 1 on; at stage 0 only the root
    vertices exist, all carrying the initial negative weight).

    ``on_stage(system, weights, metrics)``, when given, is called after
    each completed stage (the CLI uses it to emit one SVG per stage).
    """
    system = NestedSystem.regular(2)
    root = system.root
    if polygon_area(clip_polygon(cfg.polygon, root)) < polygon_area(cfg.polygon) - 1e-9:
        raise ValueError("target polygon must lie inside the root simplex")
    root_area = geometry.simplex_volume(root.coords)
    weights = WeightVector.constant(INITIAL_WEIGHT, 3)
    metrics: list = []
    limit = cfg.max_stages if cfg.epsilon is not None else cfg.stages
    for stage in range(1, limit + 1):
        for leaf_id in system.leaves():
            s = system.node_simplex(leaf_id)
            pc = clip_polygon(cfg.polygon, s)
            empty = len(pc) < 3 or polygon_area(pc) < AREA_EPS
            excluded_parent = bool(weights.excluded[list(s.vertex_ids)].any())
            vid = system.split(leaf_id, s.coords.mean(axis=0))
            if empty or excluded_parent:
                weights = weights.appended(0.0, excluded=True)
                continue
            record = system.split_records[-1]
            w_avg = float(record.beta @ weights.values[list(record.parent_vertex_ids)])
            w_new = minimal_weight(
                system, system.nodes[record.node].children, vid, cfg.polygon, weights
            )
            if w_new is None:
                w_new = w_avg
            elif stage >= 2:
                # the cap is what makes the region shrink; at stage 1 the
                # constraint maximum must win so containment gets established
                w_new = min(w_new, w_avg)
            weights = weights.appended(w_new)
        metrics.append(_stage_metrics(system, weights, cfg.polygon, stage))
        if on_stage is not None:
            on_stage(system, weights, metrics[-1])
        if cfg.epsilon is not None and metrics[-1].excess_ratio(root_area) < cfg.epsilon:
            break
    return ApproxResult(system, weights, cfg.polygon, metrics)


def _leaf_positive_polygon(system, weights, leaf_id):
    s = system.node_simplex(leaf_id)
    ids = list(s.vertex_ids)
    if weights.excluded[ids].any():
        return np.empty((0, 2))
    return clip_polygon_by_values(s.coords, weights.values[ids])


def region_area(system: NestedSystem, weights: WeightVector) -> float:
    """Exact area of the non-negative region: within each leaf the decision
    function is affine, so the positive part is one half-plane clip; leaves
    touching an excluded vertex contribute nothing."""
    if system.dim != 2:
        raise ValueError("exact region area requires d = 2")
    return sum(
        polygon_area(_leaf_positive_polygon(system, weights, leaf))
        for leaf in system.leaves()
    )


def excess_area(system: NestedSystem, weights: WeightVector, polygon: np.ndarray) -> float:
    """Exact area of (region minus polygon)."""
    if system.dim != 2:
        raise ValueError("exact excess area requires d = 2")
    total = 0.0
    for leaf in system.leaves():
        pos = _leaf_positive_polygon(system, weights, leaf)
        if len(pos) < 3:
            continue
        total += polygon_area(pos) - polygon_area(clip_to_convex(pos, polygon))
    return total


def _stage_metrics(system, weights, polygon, stage) -> StageMetrics:
    leaves = system.leaves()
    verts = system.vertex_array()
    max_diam = max(
        simplex_diameter(verts[list(system.nodes[l].vertex_ids)]) for l in leaves
    )
    return StageMetrics(
        stage=stage,
        leaves=len(leaves),
        max_diameter=float(max_diam),
        region_area=region_area(system, weights),
        excess_area=excess_area(system, weights, polygon),
    )


def verify_containment(
    system: NestedSystem,
    weights: WeightVector,
    polygon: np.ndarray,
    tol: float = 1e-9,
):
    """Exact containment check: every vertex of the polygon clipped to every
    leaf must have a non-negative interpolated decision value (the function
    is affine per leaf, so vertex checks cover the whole intersection).
    Returns (ok, worst value)."""
    worst = np.inf
    for leaf in system.leaves():
        s = system.node_simplex(leaf)
        pc = clip_polygon(polygon, s)
        if len(pc) < 3 or polygon_area(pc) < AREA_EPS:
            continue
        ids = list(s.vertex_ids)
        if weights.excluded[ids].any():
            return False, -np.inf
        wv = weights.values[ids]
        for v in pc:
            value = float(barycentric_coords(s, v) @ wv)
            worst = min(worst, value)
    return worst >= -tol, worst


def sampled_region_volume(
    system: NestedSystem,
    weights: WeightVector,
    n_samples: int,
    seed: int,
):
    """Monte-Carlo estimate of the region volume in any dimension.

    Samples uniformly in the root simplex (Dirichlet coefficients) and
    returns (estimate, half-width of a 95% confidence interval).
    """
    rng = np.random.default_rng(seed)
    d = system.dim
    root = system.root
    alphas = rng.dirichlet(np.ones(d + 1), size=n_samples)
    X = alphas @ root.coords
    idx, val, _ = system.embed_batch(X)
    inside = decision_values(weights, idx, val) >= 0.0
    p = float(inside.mean())
    vol_root = geometry.simplex_volume(root.coords)
    half = 1.96 * np.sqrt(max(p * (1.0 - p), 0.0) / n_samples) * vol_root
    return p * vol_root, half
