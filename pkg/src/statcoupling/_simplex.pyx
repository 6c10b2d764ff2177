# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled transportation simplex; mirrors ``_simplex_py.transport_simplex``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef int BLAND_AFTER = 50


cdef void _build_adj(Py_ssize_t k, Py_ssize_t l, Py_ssize_t nb,
                     const long long[:] rows, const long long[:] cols,
                     long long[:] start, long long[:] fill,
                     long long[:] nbr, long long[:] edge) noexcept nogil:
    cdef Py_ssize_t n = k + l, e, r, c
    for e in range(n + 1):
        start[e] = 0
    for e in range(nb):
        start[rows[e] + 1] += 1
        start[k + cols[e] + 1] += 1
    for e in range(n):
        start[e + 1] += start[e]
    for e in range(n):
        fill[e] = start[e]
    for e in range(nb):
        r = rows[e]
        c = k + cols[e]
        nbr[fill[r]] = c
        edge[fill[r]] = e
        fill[r] += 1
        nbr[fill[c]] = r
        edge[fill[c]] = e
        fill[c] += 1


cdef void _potentials(const double[:, :] C, Py_ssize_t k, Py_ssize_t l,
                      long long[:] start, long long[:] nbr,
                      double[:] u, double[:] v,
                      char[:] seen, long long[:] stack) noexcept nogil:
    cdef Py_ssize_t n = k + l, top = 0, node, p, other
    for p in range(n):
        seen[p] = 0
    u[0] = 0.0
    seen[0] = 1
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        for p in range(start[node], start[node + 1]):
            other = nbr[p]
            if seen[other]:
                continue
            seen[other] = 1
            if node < k:
                v[other - k] = C[node, other - k] - u[node]
            else:
                u[other] = C[other, node - k] - v[node - k]
            stack[top] = other
            top += 1


cdef Py_ssize_t _path(Py_ssize_t n, Py_ssize_t src, Py_ssize_t goal,
                      long long[:] start, long long[:] nbr, long long[:] edge,
                      long long[:] par, long long[:] pedge, long long[:] stack,
                      long long[:] out) noexcept nogil:
    cdef Py_ssize_t top, node, p, other, m = 0
    for p in range(n):
        par[p] = -2
    par[src] = -1
    stack[0] = src
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if node == goal:
            break
        for p in range(start[node], start[node + 1]):
            other = nbr[p]
            if par[other] != -2:
                continue
            par[other] = node
            pedge[other] = edge[p]
            stack[top] = other
            top += 1
    node = goal
    while node != src:
        out[m] = pedge[node]
        m += 1
        node = par[node]
    return m


def transport_simplex(C, a, b, double tol=1e-12, max_iter=None):
    """See ``_simplex_py.transport_simplex``."""
    from ._simplex_py import northwest_corner

    cdef const double[:, :] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t k = Cv.shape[0], l = Cv.shape[1]
    cdef Py_ssize_t nb = k + l - 1, n = k + l
    r0, c0, f0 = northwest_corner(a, b)
    cdef long long[:] rows = np.ascontiguousarray(r0, dtype=np.int64)
    cdef long long[:] cols = np.ascontiguousarray(c0, dtype=np.int64)
    cdef double[:] flows = np.ascontiguousarray(f0, dtype=np.float64)
    u_arr = np.zeros(k)
    v_arr = np.zeros(l)
    cdef double[:] u = u_arr
    cdef double[:] v = v_arr
    cdef long long[:] start = np.zeros(n + 1, dtype=np.int64)
    cdef long long[:] fill = np.zeros(n, dtype=np.int64)
    cdef long long[:] nbr = np.zeros(2 * nb, dtype=np.int64)
    cdef long long[:] edge = np.zeros(2 * nb, dtype=np.int64)
    cdef long long[:] stack = np.zeros(n + 1, dtype=np.int64)
    cdef long long[:] par = np.zeros(n, dtype=np.int64)
    cdef long long[:] pedge = np.zeros(n, dtype=np.int64)
    cdef long long[:] path = np.zeros(n, dtype=np.int64)
    cdef char[:] seen = np.zeros(n, dtype=np.int8)
    cdef long long cap = 50 * k * l + 1000 if max_iter is None else max_iter
    cdef double cmax = 0.0, rc_tol, best, r, theta
    cdef Py_ssize_t i, j, e, m, pos, ei = 0, ej = 0, leave
    cdef long long idx, key, bestkey
    cdef long long it = 0
    cdef int degenerate_run = 0
    cdef bint done = 0, overflow = 0

    with nogil:
        for i in range(k):
            for j in range(l):
                if fabs(Cv[i, j]) > cmax:
                    cmax = fabs(Cv[i, j])
        rc_tol = tol * (1.0 + cmax)
        while True:
            _build_adj(k, l, nb, rows, cols, start, fill, nbr, edge)
            _potentials(Cv, k, l, start, nbr, u, v, seen, stack)
            if it >= cap:
                overflow = 1
                break
            idx = -1
            if degenerate_run < BLAND_AFTER:
                best = 0.0
                for i in range(k):
                    for j in range(l):
                        r = Cv[i, j] - u[i] - v[j]
                        if idx < 0 or r < best:
                            best = r
                            idx = i * l + j
                if best >= -rc_tol:
                    break
            else:
                for i in range(k):
                    for j in range(l):
                        if Cv[i, j] - u[i] - v[j] < -rc_tol:
                            idx = i * l + j
                            break
                    if idx >= 0:
                        break
                if idx < 0:
                    break
            ei = idx // l
            ej = idx % l
            m = _path(n, ei, k + ej, start, nbr, edge, par, pedge, stack, path)
            theta = flows[path[0]]
            pos = 2
            while pos < m:
                if flows[path[pos]] < theta:
                    theta = flows[path[pos]]
                pos += 2
            leave = -1
            bestkey = -1
            pos = 0
            while pos < m:
                e = path[pos]
                if flows[e] <= theta:
                    key = rows[e] * l + cols[e]
                    if bestkey < 0 or key < bestkey:
                        bestkey = key
                        leave = e
                pos += 2
            for pos in range(m):
                if pos % 2 == 0:
                    flows[path[pos]] -= theta
                else:
                    flows[path[pos]] += theta
            rows[leave] = ei
            cols[leave] = ej
            flows[leave] = theta
            if theta <= 0.0:
                degenerate_run += 1
            else:
                degenerate_run = 0
            it += 1

    if overflow:
        raise RuntimeError(f"transport simplex did not converge in {cap} pivots")
    out_rows = np.asarray(rows).copy()
    out_cols = np.asarray(cols).copy()
    out_flows = np.maximum(np.asarray(flows), 0.0)
    return out_rows, out_cols, out_flows, u_arr, v_arr, int(it)
