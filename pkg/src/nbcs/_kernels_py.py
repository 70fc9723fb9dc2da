"""Pure-Python/numpy reference kernels.

Same contracts as the compiled extension ``nbcs._kernels``; used as the
import-time fallback and as the cross-check in the backend benchmark.
Point routing is vectorized by walking the tree breadth-first and carrying
each node's pending points as one batch, so per-point Python overhead stays
O(tree depth / batch size).
"""
from __future__ import annotations

import numpy as np

NAME = "python"

# Fold the running Pegasos scale into the weight vector once it drops below
# this; keeps the raw vector representable.  Mirrored by the C kernel.
_SCALE_FLOOR = 1e-9

# Candidate minima within this of the best count as tied, and the lowest
# child index wins; without it, points on shared faces would be routed by
# last-ulp rounding noise.  Mirrored by the C kernel.
TIE_EPS = 1e-12


def locate_embed(X, node_children, node_beta, node_inv, tol):
    """Route points to their containing leaf and solve leaf coordinates.

    X             : (n, d) query points
    node_children : (m, d+1) int32, child node ids, -1 rows mark leaves
    node_beta     : (m, d+1) split-point coordinates within each node
    node_inv      : (m, d+1, d+1) cached augmented-matrix inverses
    tol           : containment slack on root coefficients

    Returns (leaf, coords): leaf node id per point (-1 if outside the root)
    and the point's barycentric coordinates in that leaf.  Child selection
    maximizes the minimum candidate coordinate, ties to the lowest child
    index; candidates come from the parent-to-child coefficient recurrence,
    the final leaf solve from the cached inverse.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    k = d + 1
    leaf = np.full(n, -1, dtype=np.int32)
    coords = np.empty((n, k), dtype=np.float64)

    aug = np.empty((n, k))
    aug[:, :d] = X
    aug[:, d] = 1.0

    alpha0 = aug @ node_inv[0].T
    inside = alpha0.min(axis=1) >= -tol
    coords[~inside] = alpha0[~inside]

    stack = [(0, np.nonzero(inside)[0], alpha0[inside])]
    while stack:
        node, pts, alpha = stack.pop()
        if len(pts) == 0:
            continue
        ch = node_children[node]
        if ch[0] < 0:
            leaf[pts] = node
            coords[pts] = aug[pts] @ node_inv[node].T
            continue
        beta = node_beta[node]
        astar = alpha / beta  # (p, k): candidate new-vertex coordinate per child
        minima = np.empty_like(astar)
        for c in range(k):
            cand = alpha - beta * astar[:, c : c + 1]
            cand[:, c] = astar[:, c]
            minima[:, c] = cand.min(axis=1)
        best = minima.max(axis=1, keepdims=True)
        choice = np.argmax(minima >= best - TIE_EPS, axis=1)  # lowest tied index
        for c in range(k):
            sel = choice == c
            if not sel.any():
                continue
            sub = alpha[sel] - beta * astar[sel, c : c + 1]
            sub[:, c] = astar[sel, c]
            stack.append((int(ch[c]), pts[sel], sub))
    return leaf, coords


def dualcd_epoch(idx, val, y, w, alpha, qii, perm, C_row):
    """One dual coordinate-descent epoch for the hinge-loss SVM.

    Maintains w = sum_i alpha_i y_i x_i with box-constrained duals
    0 <= alpha_i <= C_row[i]; each coordinate is solved in closed form,
    touching only the row's non-zeros.  Returns the epoch's largest
    projected gradient magnitude (0 at the exact optimum).
    """
    n, k = idx.shape
    max_pg = 0.0
    for p in range(n):
        i = perm[p]
        C = C_row[i]
        g = 0.0
        for j in range(k):
            g += w[idx[i, j]] * val[i, j]
        g = y[i] * g - 1.0
        a = alpha[i]
        if a <= 0.0:
            pg = g if g < 0.0 else 0.0
        elif a >= C:
            pg = g if g > 0.0 else 0.0
        else:
            pg = g
        if pg != 0.0:
            if abs(pg) > max_pg:
                max_pg = abs(pg)
            a_new = a - g / qii[i]
            if a_new < 0.0:
                a_new = 0.0
            elif a_new > C:
                a_new = C
            step = (a_new - a) * y[i]
            if step != 0.0:
                for j in range(k):
                    w[idx[i, j]] += step * val[i, j]
                alpha[i] = a_new
    return max_pg


def pegasos_epoch(idx, val, y, w, cost, perm, lam, t, proj_r):
    """One stochastic-subgradient epoch over the permuted sample.

    Maintains w = s * w_raw with the usual scale trick; the scale is folded
    back into ``w`` before returning, and the global step counter ``t`` is
    returned for the next epoch.  Learning rate 1/(lam*(t+1)); iterates are
    projected onto the ball of radius ``proj_r`` when they leave it.
    ``cost`` weights each example's hinge subgradient.
    """
    n, k = idx.shape
    s = 1.0
    norm2 = 0.0
    for j in range(len(w)):
        norm2 += w[j] * w[j]
    for p in range(n):
        i = perm[p]
        t += 1
        eta = 1.0 / (lam * (t + 1.0))
        raw_dot = 0.0
        for j in range(k):
            raw_dot += w[idx[i, j]] * val[i, j]
        margin = y[i] * s * raw_dot
        s *= 1.0 - eta * lam
        if margin < 1.0:
            g = eta * cost[i] * y[i] / s
            for j in range(k):
                v = val[i, j]
                norm2 += 2.0 * g * v * w[idx[i, j]] + g * v * g * v
                w[idx[i, j]] += g * v
        if proj_r > 0.0:
            sn2 = s * s * norm2
            if sn2 > proj_r * proj_r:
                s *= proj_r / np.sqrt(sn2)
        if s < _SCALE_FLOOR:
            for j in range(len(w)):
                w[j] *= s
            norm2 *= s * s
            s = 1.0
    for j in range(len(w)):
        w[j] *= s
    return t
