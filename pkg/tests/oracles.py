"""Independent reference computations used only by the tests.

Everything here is written from definitions with plain loops, so it shares
no code path with the package.
"""

import itertools

import numpy as np


def window_probs_bruteforce(symbols, P, pi, n):
    """{window tuple: probability} by direct product over all K^n words."""
    out = {}
    K = len(symbols)
    for word in itertools.product(range(K), repeat=n):
        p = pi[word[0]]
        for a, b in zip(word, word[1:]):
            p *= P[a][b]
        if p > 0:
            key = tuple(float(symbols[i]) for i in word)
            out[key] = out.get(key, 0.0) + p
    return out


def transport_vertices(C, a, b):
    """Minimum over all basic feasible solutions of the transportation polytope.

    Enumerates every choice of k+l-1 cells, solves the marginal equations
    on them and keeps nonnegative solutions. Only for k*l <= 12.
    """
    C = np.asarray(C, dtype=float)
    k, l = C.shape
    cells = [(i, j) for i in range(k) for j in range(l)]
    best = np.inf
    rhs = np.concatenate([a, b])
    for basis in itertools.combinations(range(len(cells)), k + l - 1):
        M = np.zeros((k + l, len(basis)))
        for c, idx in enumerate(basis):
            i, j = cells[idx]
            M[i, c] = 1.0
            M[k + j, c] = 1.0
        x, res, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
        if rank < k + l - 1 or np.max(np.abs(M @ x - rhs)) > 1e-10 or np.min(x) < -1e-12:
            continue
        best = min(best, sum(C[cells[idx]] * x[c] for c, idx in enumerate(basis)))
    return best


def transport_linprog(C, a, b):
    from scipy.optimize import linprog

    C = np.asarray(C, dtype=float)
    k, l = C.shape
    A = np.zeros((k + l, k * l))
    for i in range(k):
        A[i, i * l : (i + 1) * l] = 1
    for j in range(l):
        A[k + j, j::l] = 1
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def c_transform_loops(f, cost, xs, ys):
    return [min(cost(x, y) - fx for x, fx in zip(xs, f)) for y in ys]


def c_transform_y_loops(g, cost, xs, ys):
    return [min(cost(x, y) - gy for y, gy in zip(ys, g)) for x in xs]


def cross_curvature_power(p, x, y):
    return (p - 1) * (p - 2) * abs(x - y) ** (p - 4)
