"""Pure-Python transportation simplex (fallback for the compiled kernel).

The compiled module ``_simplex`` implements the same pivoting rules; both
must return identical bases for identical input.
"""

import numpy as np

# consecutive degenerate pivots tolerated before switching to Bland's rule
BLAND_AFTER = 50


def northwest_corner(a, b):
    k, l = len(a), len(b)
    ra = np.array(a, dtype=float)
    rb = np.array(b, dtype=float)
    rows = np.empty(k + l - 1, dtype=np.int64)
    cols = np.empty(k + l - 1, dtype=np.int64)
    flows = np.empty(k + l - 1, dtype=float)
    i = j = 0
    for t in range(k + l - 1):
        x = min(ra[i], rb[j])
        if x < 0.0:
            x = 0.0
        rows[t], cols[t], flows[t] = i, j, x
        ra[i] -= x
        rb[j] -= x
        if i == k - 1:
            j += 1
        elif j == l - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return rows, cols, flows


def _tree(k, l, rows, cols):
    adj = [[] for _ in range(k + l)]
    for e in range(len(rows)):
        r, c = int(rows[e]), k + int(cols[e])
        adj[r].append((c, e))
        adj[c].append((r, e))
    return adj


def _potentials(C, k, l, adj):
    u = np.zeros(k)
    v = np.zeros(l)
    seen = [False] * (k + l)
    seen[0] = True
    stack = [0]
    while stack:
        node = stack.pop()
        for nb, _ in adj[node]:
            if seen[nb]:
                continue
            seen[nb] = True
            if node < k:
                v[nb - k] = C[node, nb - k] - u[node]
            else:
                u[nb] = C[nb, node - k] - v[node - k]
            stack.append(nb)
    return u, v


def _path_edges(adj, start, goal):
    """Basis indices on the tree path goal -> start, in walking order."""
    parent = {start: (-1, -1)}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nb, e in adj[node]:
            if nb not in parent:
                parent[nb] = (node, e)
                stack.append(nb)
    edges = []
    node = goal
    while node != start:
        node, e = parent[node]
        edges.append(e)
    return edges


def transport_simplex(C, a, b, tol=1e-12, max_iter=None):
    """Solve min <C, x> over couplings of ``a`` and ``b``.

    Returns ``(rows, cols, flows, u, v, iterations)`` where the first three
    describe the final basic solution (k + l - 1 cells, possibly with zero
    flow) and ``u``, ``v`` are the basis duals with ``u[0] = 0``.
    """
    C = np.ascontiguousarray(C, dtype=float)
    k, l = C.shape
    rows, cols, flows = northwest_corner(a, b)
    if max_iter is None:
        max_iter = 50 * k * l + 1000
    rc_tol = tol * (1.0 + float(np.max(np.abs(C))) if C.size else 1.0)
    degenerate_run = 0
    it = 0
    while True:
        adj = _tree(k, l, rows, cols)
        u, v = _potentials(C, k, l, adj)
        if it >= max_iter:
            raise RuntimeError(f"transport simplex did not converge in {max_iter} pivots")
        R = C - u[:, None] - v[None, :]
        flat = R.ravel()
        if degenerate_run < BLAND_AFTER:
            idx = int(np.argmin(flat))
            if flat[idx] >= -rc_tol:
                break
        else:
            neg = np.flatnonzero(flat < -rc_tol)
            if neg.size == 0:
                break
            idx = int(neg[0])
        ei, ej = divmod(idx, l)
        path = _path_edges(adj, ei, k + ej)
        minus = path[0::2]
        theta = min(flows[e] for e in minus)
        leave = -1
        best = None
        for e in minus:
            if flows[e] <= theta:
                key = rows[e] * l + cols[e]
                if best is None or key < best:
                    best, leave = key, e
        for pos, e in enumerate(path):
            if pos % 2 == 0:
                flows[e] -= theta
            else:
                flows[e] += theta
        rows[leave], cols[leave], flows[leave] = ei, ej, theta
        degenerate_run = degenerate_run + 1 if theta <= 0.0 else 0
        it += 1
    np.maximum(flows, 0.0, out=flows)
    return rows, cols, flows, u, v, it
