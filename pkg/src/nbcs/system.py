"""The nested simplicial coordinate system.

A system starts from a root simplex and grows by splitting leaf simplices
at strictly interior points; each split appends one global vertex and d+1
child simplices (child k replaces parent vertex k -- a fixed convention
that point location and tests rely on).  Points embed as the barycentric
coefficients of their lowest containing simplex, giving vectors with at
most d+1 non-zeros that sum to 1.

Construction is single-writer: no reads may run concurrently with
``split``.  Once built, all read operations are pure and thread-safe.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from ._kernels_py import TIE_EPS
from .backend import kernels as _default_kernels
from .errors import NumericalError, OutsideRootError, SplitError
from .geometry import CONTAIN_TOL, Simplex, augmented_matrix, barycentric_coords

# Split points must have every coefficient above this; callers with
# boundary-hugging points nudge them inward first (nudge_to_interior).
INTERIOR_MIN = 1e-6
NUDGE_STEP = 1e-3


@dataclass(frozen=True)
class SplitRecord:
    """Bookkeeping for one split: which node, and the new vertex's coordinates
    over the parent's d+1 vertices (all positive, summing to 1)."""

    vertex: int
    node: int
    parent_vertex_ids: tuple
    beta: np.ndarray


@dataclass(frozen=True)
class SparseEmbedding:
    """Embedded point: (global vertex index, coefficient) pairs.

    Carries exactly the d+1 vertices of one leaf simplex; coefficients of
    vertices the point does not touch are (numerically) zero.  ``pruned``
    drops near-zero entries for display or sparse storage.
    """

    indices: np.ndarray
    values: np.ndarray

    def pruned(self, tol: float = 1e-12) -> "SparseEmbedding":
        keep = np.abs(self.values) > tol
        return SparseEmbedding(self.indices[keep], self.values[keep])


class WeightVector:
    """One weight per global vertex plus an explicit excluded flag.

    Excluded stands for the minus-infinity assignment: any embedding that
    touches an excluded vertex gets decision value -inf (classified
    negative) without NaNs leaking into dot products.
    """

    __slots__ = ("values", "excluded")

    def __init__(self, values, excluded=None):
        self.values = np.asarray(values, dtype=float)
        if excluded is None:
            excluded = np.zeros(len(self.values), dtype=bool)
        self.excluded = np.asarray(excluded, dtype=bool)
        if len(self.values) != len(self.excluded):
            raise ValueError("values/excluded length mismatch")

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def constant(cls, c: float, n: int) -> "WeightVector":
        return cls(np.full(n, float(c)))

    def appended(self, value: float, excluded: bool = False) -> "WeightVector":
        return WeightVector(
            np.append(self.values, value), np.append(self.excluded, excluded)
        )

    def copy(self) -> "WeightVector":
        return WeightVector(self.values.copy(), self.excluded.copy())


class _Node:
    __slots__ = ("vertex_ids", "inv", "children", "beta", "depth")

    def __init__(self, vertex_ids, inv, depth):
        self.vertex_ids = vertex_ids
        self.inv = inv
        self.children = None  # list of d+1 node ids once split
        self.beta = None  # split-point coords in this node, once split
        self.depth = depth


class NestedSystem:
    def __init__(self, root: Simplex):
        self.dim = root.dim
        self._vertices = [root.coords[i].copy() for i in range(root.dim + 1)]
        self.nodes = [_Node(tuple(range(root.dim + 1)), np.asarray(root.inv_matrix), 0)]
        self.split_records: list[SplitRecord] = []
        self._compiled = None
        self._kernels = _default_kernels

    @classmethod
    def regular(cls, d: int) -> "NestedSystem":
        return cls(geometry.regular_simplex(d))

    # -- basic accessors ----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self._vertices)

    def vertex(self, i: int) -> np.ndarray:
        return self._vertices[i]

    def vertex_array(self) -> np.ndarray:
        return np.asarray(self._vertices)

    def node_simplex(self, node_id: int) -> Simplex:
        node = self.nodes[node_id]
        coords = np.asarray([self._vertices[i] for i in node.vertex_ids])
        return Simplex(node.vertex_ids, coords, node.inv)

    def is_leaf(self, node_id: int) -> bool:
        return self.nodes[node_id].children is None

    def leaves(self) -> list:
        return [i for i, n in enumerate(self.nodes) if n.children is None]

    def node_depth(self, node_id: int) -> int:
        return self.nodes[node_id].depth

    @property
    def root(self) -> Simplex:
        return self.node_simplex(0)

    # -- construction -------------------------------------------------------

    def split(self, node_id: int, point) -> int:
        """Split a leaf at a strictly interior point; returns the new vertex id.

        Child k replaces parent vertex k.  The new vertex's coordinates over
        the parent (beta) are stored as the split record used by weight
        lifting and the coefficient recurrence.
        """
        node = self.nodes[node_id]
        if node.children is not None:
            raise SplitError(f"node {node_id} is not a leaf")
        point = np.asarray(point, dtype=float)
        parent = self.node_simplex(node_id)
        beta = barycentric_coords(parent, point)
        if beta.min() <= INTERIOR_MIN:
            raise SplitError(
                f"split point not strictly interior (min coefficient "
                f"{beta.min():.3e} <= {INTERIOR_MIN:g})"
            )
        new_vid = len(self._vertices)
        self._vertices.append(point.copy())
        child_ids = []
        k = self.dim + 1
        for c in range(k):
            vids = list(node.vertex_ids)
            vids[c] = new_vid
            coords = np.asarray([self._vertices[i] for i in vids])
            inv = np.linalg.inv(augmented_matrix(coords))
            child_ids.append(len(self.nodes))
            self.nodes.append(_Node(tuple(vids), inv, node.depth + 1))
        node.children = child_ids
        node.beta = beta
        self.split_records.append(
            SplitRecord(new_vid, node_id, node.vertex_ids, beta)
        )
        self._compiled = None
        return new_vid

    def nudge_to_interior(self, node_id: int, point) -> np.ndarray:
        """Move a boundary-hugging point a small step toward the leaf
        barycenter so it satisfies the split interiority threshold."""
        point = np.asarray(point, dtype=float)
        s = self.node_simplex(node_id)
        center = geometry.barycenter(s)
        for _ in range(8):
            if barycentric_coords(s, point).min() > INTERIOR_MIN:
                return point
            point = point + NUDGE_STEP * (center - point)
        raise SplitError("could not nudge point into the leaf interior")

    # -- compiled view ------------------------------------------------------

    def compiled(self):
        """Flat array view of the tree consumed by the backend kernels."""
        if self._compiled is None:
            m = len(self.nodes)
            k = self.dim + 1
            children = np.full((m, k), -1, dtype=np.int32)
            beta = np.zeros((m, k), dtype=np.float64)
            inv = np.empty((m, k, k), dtype=np.float64)
            vids = np.empty((m, k), dtype=np.int32)
            for i, node in enumerate(self.nodes):
                vids[i] = node.vertex_ids
                inv[i] = node.inv
                if node.children is not None:
                    children[i] = node.children
                    beta[i] = node.beta
            self._compiled = (children, beta, inv, vids)
        return self._compiled

    # -- queries ------------------------------------------------------------

    def embed_batch(self, X, tol: float = CONTAIN_TOL):
        """Embed many points at once.

        Returns (indices, values, leaf_ids): (n, d+1) global vertex indices
        and coefficients, plus each point's leaf node id.  Raises
        OutsideRootError on the first point outside the root.
        """
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        children, beta, inv, vids = self.compiled()
        leaf, coords = self._kernels.locate_embed(X, children, beta, inv, tol)
        if (leaf < 0).any():
            bad = int(np.nonzero(leaf < 0)[0][0])
            pos = int(np.argmin(coords[bad]))
            raise OutsideRootError(float(coords[bad, pos]), pos)
        return vids[leaf], coords, leaf

    def locate(self, x, tol: float = CONTAIN_TOL) -> int:
        """Leaf node id containing x.

        Descends from the root; at each level the child is chosen by the
        maximal minimum candidate coefficient (ties to the lowest child
        index), so boundary points resolve deterministically.  Cost is one
        O(d^2) coordinate solve per level.
        """
        _, _, leaf = self.embed_batch(np.asarray(x, dtype=float)[None, :], tol)
        return int(leaf[0])

    def embed(self, x, tol: float = CONTAIN_TOL) -> SparseEmbedding:
        idx, val, _ = self.embed_batch(np.asarray(x, dtype=float)[None, :], tol)
        return SparseEmbedding(idx[0].astype(np.int64), val[0])

    def project_back(self, e: SparseEmbedding) -> np.ndarray:
        """Map an embedding back to the origin space: sum(alpha_i * q_i)."""
        idx = np.asarray(e.indices)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_vertices):
            raise IndexError("embedding references unknown vertices")
        verts = self.vertex_array()[idx]
        return np.asarray(e.values) @ verts

    def decision_value(self, w: WeightVector, x, tol: float = CONTAIN_TOL) -> float:
        """w . embed(x); -inf when the leaf touches an excluded vertex."""
        idx, val, _ = self.embed_batch(np.asarray(x, dtype=float)[None, :], tol)
        return float(decision_values(w, idx, val)[0])

    def coefficient_recurrence_check(self, x, record: SplitRecord) -> float:
        """Residual of the one-step coefficient recurrence at x.

        For x inside the split simplex, the parent coefficients must equal
        the child coefficients plus beta times the new vertex's coefficient;
        returns the max absolute mismatch (a diagnostic / test oracle).
        """
        x = np.asarray(x, dtype=float)
        node = self.nodes[record.node]
        if node.children is None:
            raise ValueError("record does not correspond to a split node")
        parent = self.node_simplex(record.node)
        alpha_t = barycentric_coords(parent, x)
        beta = record.beta
        # containing child by the locate tie rule (maximal minimum candidate,
        # ties within TIE_EPS to the lowest child index)
        k = self.dim + 1
        minima = np.empty(k)
        for c in range(k):
            astar = alpha_t[c] / beta[c]
            cand = alpha_t - beta * astar
            cand[c] = astar
            minima[c] = cand.min()
        best_c = int(np.argmax(minima >= minima.max() - TIE_EPS))
        child = self.node_simplex(node.children[best_c])
        alpha_child = barycentric_coords(child, x)
        astar = alpha_child[best_c]
        alpha_t1 = alpha_child.copy()
        alpha_t1[best_c] = 0.0  # parent vertex best_c is absent from the child
        return float(np.abs(alpha_t - alpha_t1 - beta * astar).max())


def decision_values(w: WeightVector, indices, values) -> np.ndarray:
    """Batch decision values; rows touching an excluded vertex get -inf."""
    out = (values * w.values[indices]).sum(axis=1)
    if w.excluded.any():
        out[w.excluded[indices].any(axis=1)] = -np.inf
    return out


def lift_weights(w: WeightVector, record: SplitRecord) -> WeightVector:
    """Extend weights across one split without changing the decision function.

    The new vertex receives the beta-weighted average of its parent
    simplex's weights; if any parent vertex is excluded the new vertex is
    excluded too.  Existing weights are copied unchanged.
    """
    if len(w) != record.vertex:
        raise ValueError(
            f"weight vector has length {len(w)}, expected {record.vertex}"
        )
    pids = list(record.parent_vertex_ids)
    if w.excluded[pids].any():
        return w.appended(0.0, excluded=True)
    return w.appended(float(record.beta @ w.values[pids]))


def hyperplane_weights(s: Simplex, points) -> np.ndarray:
    """Weights over s's vertices whose decision function vanishes on the
    hyperplane through the given d affinely independent points.

    Solves A w = 0 for the d x (d+1) matrix A of the points' barycentric
    coordinates; the result is normalized to unit Euclidean norm with the
    first non-zero entry positive.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = s.dim
    if pts.shape != (d, d):
        raise ValueError(f"need {d} points of dimension {d}, got {pts.shape}")
    A = np.asarray([barycentric_coords(s, p) for p in pts])
    _, sv, vt = np.linalg.svd(A)
    if sv[-1] <= 1e-10 * sv[0]:
        raise NumericalError("hyperplane points are affinely dependent")
    w = vt[-1]
    for wi in w:
        if abs(wi) > 1e-12:
            if wi < 0:
                w = -w
            break
    return w
