# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: tree point location + embedding, Pegasos epochs.

Contracts match nbcs._kernels_py; see that module for documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "cython"

cdef double _SCALE_FLOOR = 1e-9
cdef double _TIE_EPS = 1e-12


def locate_embed(X, node_children, node_beta, node_inv, double tol):
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef int[:, ::1] children = node_children
    cdef double[:, ::1] beta = node_beta
    cdef double[:, :, ::1] inv = node_inv
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t k = d + 1

    leaf_arr = np.full(n, -1, dtype=np.int32)
    coords_arr = np.empty((n, k), dtype=np.float64)
    cdef int[::1] leaf = leaf_arr
    cdef double[:, ::1] coords = coords_arr
    # scratch: current coords, per-child candidate coords and minima
    alpha_arr = np.empty(k, dtype=np.float64)
    astars_arr = np.empty(k, dtype=np.float64)
    minima_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] astars = astars_arr
    cdef double[::1] minima = minima_arr
    cdef Py_ssize_t p, i, j, c, node, best_c
    cdef double acc, mn, best_mn, astar, ci

    with nogil:
        for p in range(n):
            # root solve: inv[0] @ (x, 1)
            mn = 0.0
            for i in range(k):
                acc = inv[0, i, d]
                for j in range(d):
                    acc += inv[0, i, j] * x[p, j]
                alpha[i] = acc
                if i == 0 or acc < mn:
                    mn = acc
            if mn < -tol:
                for i in range(k):
                    coords[p, i] = alpha[i]
                continue
            node = 0
            while children[node, 0] >= 0:
                for c in range(k):
                    astar = alpha[c] / beta[node, c]
                    astars[c] = astar
                    mn = astar
                    for i in range(k):
                        if i != c:
                            ci = alpha[i] - beta[node, i] * astar
                            if ci < mn:
                                mn = ci
                    minima[c] = mn
                best_mn = minima[0]
                for c in range(1, k):
                    if minima[c] > best_mn:
                        best_mn = minima[c]
                best_c = 0
                for c in range(k):
                    if minima[c] >= best_mn - _TIE_EPS:
                        best_c = c
                        break
                for i in range(k):
                    alpha[i] = alpha[i] - beta[node, i] * astars[best_c]
                alpha[best_c] = astars[best_c]
                node = children[node, best_c]
            leaf[p] = <int> node
            for i in range(k):
                acc = inv[node, i, d]
                for j in range(d):
                    acc += inv[node, i, j] * x[p, j]
                coords[p, i] = acc
    return leaf_arr, coords_arr


def dualcd_epoch(idx, val, y, w, alpha, qii, perm, C_row):
    cdef int[:, ::1] ii = idx
    cdef double[:, ::1] vv = val
    cdef double[::1] yy = y
    cdef double[::1] ww = w
    cdef double[::1] aa = alpha
    cdef double[::1] qq = qii
    cdef int[::1] pp = perm
    cdef double[::1] cc = C_row
    cdef Py_ssize_t n = ii.shape[0]
    cdef Py_ssize_t k = ii.shape[1]
    cdef Py_ssize_t p, j, i
    cdef double g, a, pg, a_new, step, C
    cdef double max_pg = 0.0

    with nogil:
        for p in range(n):
            i = pp[p]
            C = cc[i]
            g = 0.0
            for j in range(k):
                g += ww[ii[i, j]] * vv[i, j]
            g = yy[i] * g - 1.0
            a = aa[i]
            if a <= 0.0:
                pg = g if g < 0.0 else 0.0
            elif a >= C:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if pg != 0.0:
                if pg > max_pg:
                    max_pg = pg
                elif -pg > max_pg:
                    max_pg = -pg
                a_new = a - g / qq[i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > C:
                    a_new = C
                step = (a_new - a) * yy[i]
                if step != 0.0:
                    for j in range(k):
                        ww[ii[i, j]] += step * vv[i, j]
                    aa[i] = a_new
    return max_pg


def pegasos_epoch(idx, val, y, w, cost, perm, double lam, long t, double proj_r):
    cdef int[:, ::1] ii = idx
    cdef double[:, ::1] vv = val
    cdef double[::1] yy = y
    cdef double[::1] ww = w
    cdef double[::1] cost_v = cost
    cdef int[::1] pp = perm
    cdef Py_ssize_t n = ii.shape[0]
    cdef Py_ssize_t k = ii.shape[1]
    cdef Py_ssize_t m = ww.shape[0]
    cdef Py_ssize_t p, j, i
    cdef double s = 1.0
    cdef double norm2 = 0.0
    cdef double eta, raw_dot, margin, g, v, sn2

    with nogil:
        for j in range(m):
            norm2 += ww[j] * ww[j]
        for p in range(n):
            i = pp[p]
            t += 1
            eta = 1.0 / (lam * (t + 1.0))
            raw_dot = 0.0
            for j in range(k):
                raw_dot += ww[ii[i, j]] * vv[i, j]
            margin = yy[i] * s * raw_dot
            s *= 1.0 - eta * lam
            if margin < 1.0:
                g = eta * cost_v[i] * yy[i] / s
                for j in range(k):
                    v = vv[i, j]
                    norm2 += 2.0 * g * v * ww[ii[i, j]] + g * v * g * v
                    ww[ii[i, j]] += g * v
            if proj_r > 0.0:
                sn2 = s * s * norm2
                if sn2 > proj_r * proj_r:
                    s *= proj_r / sqrt(sn2)
            if s < _SCALE_FLOOR:
                for j in range(m):
                    ww[j] *= s
                norm2 *= s * s
                s = 1.0
        for j in range(m):
            ww[j] *= s
    return t
