"""Simplex and convex-polygon primitives.

All values here are immutable after construction and every operation is a
pure function, so unrestricted parallel use is safe.  A simplex caches the
inverse of its augmented vertex matrix, making each barycentric solve an
O(d^2) mat-vec after a one-time O(d^3) factorization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSimplexError

# Absolute tolerance on barycentric coefficients for containment tests.
# Coefficients are scale-free (they sum to 1), so an absolute value works.
CONTAIN_TOL = 1e-9

# |det Q| below DEGENERACY_RTOL times the product of per-vertex magnitudes
# (each clamped below at 1) marks the simplex as degenerate.
DEGENERACY_RTOL = 1e-12


def augmented_matrix(coords: np.ndarray) -> np.ndarray:
    """(d+1)x(d+1) matrix whose columns are the vertices, plus a row of ones."""
    n = coords.shape[0]
    q = np.empty((n, n))
    q[:-1, :] = coords.T
    q[-1, :] = 1.0
    return q


@dataclass(frozen=True)
class Simplex:
    """d+1 affinely independent vertices with a cached coordinate solver.

    ``vertex_ids`` are global indices into some external vertex table (the
    nested system's); for standalone use they default to 0..d.  ``coords``
    holds the actual vertex positions, one row per vertex, aligned with
    ``vertex_ids``.
    """

    vertex_ids: tuple
    coords: np.ndarray
    inv_matrix: np.ndarray

    @classmethod
    def from_coords(cls, coords, vertex_ids=None) -> "Simplex":
        coords = np.array(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[0] != coords.shape[1] + 1:
            raise ValueError(f"need (d+1, d) vertex array, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("non-finite vertex coordinates")
        if vertex_ids is None:
            vertex_ids = tuple(range(coords.shape[0]))
        q = augmented_matrix(coords)
        det = np.linalg.det(q)
        scale = float(np.prod(np.maximum(np.abs(coords).max(axis=1), 1.0)))
        if abs(det) <= DEGENERACY_RTOL * scale:
            raise DegenerateSimplexError(
                f"|det|={abs(det):.3e} below {DEGENERACY_RTOL * scale:.3e}"
            )
        inv = np.linalg.inv(q)
        coords.setflags(write=False)
        inv.setflags(write=False)
        return cls(tuple(vertex_ids), coords, inv)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def regular_simplex(d: int) -> Simplex:
    """Regular d-simplex with unit side length and first vertex at the origin.

    Construction: the d+1 standard basis vectors of R^{d+1} scaled by
    1/sqrt(2) (pairwise distances exactly 1), mapped isometrically into R^d
    by an orthonormal basis of the hyperplane sum(x) = 0, then translated so
    vertex 0 lands on the origin.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    ones = np.ones((d + 1, 1))
    q_full, _ = np.linalg.qr(ones, mode="complete")
    basis = q_full[:, 1:]  # orthonormal, orthogonal to the all-ones vector
    corners = np.eye(d + 1) / math.sqrt(2.0)
    corners -= corners[0]
    return Simplex.from_coords(corners @ basis)


def barycentric_coords(s: Simplex, x: np.ndarray) -> np.ndarray:
    """Coefficients alpha with x = sum(alpha_i * v_i) and sum(alpha) = 1."""
    aug = np.append(np.asarray(x, dtype=float), 1.0)
    return s.inv_matrix @ aug


def contains(s: Simplex, x: np.ndarray, tol: float = CONTAIN_TOL) -> bool:
    """True iff every barycentric coefficient of x is >= -tol."""
    return bool(barycentric_coords(s, x).min() >= -tol)


def barycenter(s: Simplex) -> np.ndarray:
    return s.coords.mean(axis=0)


def diameter(s: Simplex) -> float:
    return simplex_diameter(s.coords)


def simplex_diameter(coords: np.ndarray) -> float:
    """Largest pairwise vertex distance."""
    diff = coords[:, None, :] - coords[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2).max()))


def simplex_volume(coords: np.ndarray) -> float:
    """d-volume via the edge-matrix determinant: |det(v_i - v_0)| / d!."""
    coords = np.asarray(coords, dtype=float)
    d = coords.shape[1]
    edges = coords[1:] - coords[0]
    return abs(float(np.linalg.det(edges))) / math.factorial(d)


def regular_simplex_volume(d: int) -> float:
    """Closed form sqrt(d+1) / (d! * sqrt(2^d)) for unit side length."""
    return math.sqrt(d + 1) / (math.factorial(d) * math.sqrt(2.0**d))


def regular_simplex_inradius(d: int) -> float:
    """Inscribed-sphere radius of the unit-side regular d-simplex."""
    return 1.0 / math.sqrt(2.0 * d * (d + 1))


# ---------------------------------------------------------------------------
# 2D convex polygons, represented as (m, 2) arrays of CCW vertices.

def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area; 0 for fewer than 3 vertices or collinear input."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))) / 2.0


def signed_polygon_area(poly: np.ndarray) -> float:
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return (float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))) / 2.0


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    poly = np.asarray(poly, dtype=float)
    if signed_polygon_area(poly) < 0:
        return poly[::-1].copy()
    return poly


def clip_polygon_by_values(poly: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Keep the part of the polygon where a linear function is >= 0.

    ``values`` holds the function at each vertex; crossing points are found
    by linear interpolation along edges.  Returns an (m, 2) array, possibly
    empty.  One pass of Sutherland-Hodgman against a single half-plane.
    """
    poly = np.asarray(poly, dtype=float)
    n = len(poly)
    if n == 0:
        return poly.reshape(0, 2)
    out = []
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        va, vb = values[i], values[(i + 1) % n]
        if va >= 0.0:
            out.append(a)
            if vb < 0.0:
                t = va / (va - vb)
                out.append(a + t * (b - a))
        elif vb >= 0.0:
            t = va / (va - vb)
            out.append(a + t * (b - a))
    if not out:
        return np.empty((0, 2))
    return np.asarray(out)


def clip_halfplane(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep {x : normal . x <= offset}."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return poly.reshape(0, 2)
    values = offset - poly @ np.asarray(normal, dtype=float)
    return clip_polygon_by_values(poly, values)


def clip_to_convex(subject: np.ndarray, clip_poly: np.ndarray) -> np.ndarray:
    """Intersection of a convex subject polygon with a convex CCW clip polygon."""
    result = np.asarray(subject, dtype=float)
    clip_poly = ensure_ccw(clip_poly)
    m = len(clip_poly)
    for i in range(m):
        if len(result) == 0:
            break
        a, b = clip_poly[i], clip_poly[(i + 1) % m]
        edge = b - a
        # left of the directed edge a->b (CCW polygon interior)
        values = edge[0] * (result[:, 1] - a[1]) - edge[1] * (result[:, 0] - a[0])
        result = clip_polygon_by_values(result, values)
    return result


def clip_polygon(poly: np.ndarray, s: Simplex) -> np.ndarray:
    """Intersection of a convex polygon with a 2-simplex (triangle)."""
    if s.dim != 2:
        raise ValueError("polygon clipping requires a 2D simplex")
    return clip_to_convex(poly, s.coords)
