"""c-transforms, c-concavity and c-supergradients on finite grids.

A grid function is a value array aligned with a point list. For
``f`` on the x-grid, ``f^c(y) = min_x c(x, y) - f(x)``; for ``g`` on the
y-grid, ``g^c(x) = min_y c(x, y) - g(y)``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import InversionError, NumericCheckFailed, ValidationError


class SupergradientWarning(UserWarning):
    """The first-order candidate failed the defining infimum on the check grid."""


def _values(f, n, name="f"):
    f = np.asarray(f, dtype=float)
    if f.shape != (n,):
        raise ValidationError(f"{name} must have one value per grid point ({n})")
    return f


def c_transform(f, cost, xs, ys):
    """``f^c`` on ``ys`` for ``f`` given on ``xs``."""
    C = cost.matrix(xs, ys)
    f = _values(f, C.shape[0])
    return np.min(C - f[:, None], axis=0)


def c_transform_y(g, cost, xs, ys):
    """``g^c`` on ``xs`` for ``g`` given on ``ys``."""
    C = cost.matrix(xs, ys)
    g = _values(g, C.shape[1], "g")
    return np.min(C - g[None, :], axis=1)


@dataclass(frozen=True)
class CConcavity:
    ok: bool
    max_gap: float
    witness: int
    fcc: np.ndarray

    def __bool__(self):
        return self.ok


def is_c_concave(f, cost, xs, ys, tol=1e-9):
    """Test ``f^{cc} == f`` on the x-grid; ``witness`` is the worst grid index.

    On a finite grid the answer is relative to ``ys``: enlarge it with the
    candidate supergradients when testing functions built elsewhere.
    """
    C = cost.matrix(xs, ys)
    f = _values(f, C.shape[0])
    fc = np.min(C - f[:, None], axis=0)
    fcc = np.min(C - fc[None, :], axis=1)
    gap = fcc - f
    if np.min(gap) < -tol:
        raise NumericCheckFailed(f"f^cc < f by {-np.min(gap):.3g}; c-transform is inconsistent")
    worst = int(np.argmax(gap))
    return CConcavity(bool(gap[worst] <= tol), float(gap[worst]), worst, fcc)


def c_supergradient_set(f, i, cost, xs, ys, tol=1e-9):
    """Indices j of ``ys`` with ``c(x_i, y_j) - f(x_i) = f^c(y_j)`` (within ``tol``)."""
    C = cost.matrix(xs, ys)
    f = _values(f, C.shape[0])
    fc = np.min(C - f[:, None], axis=0)
    return np.flatnonzero(C[i] - f[i] <= fc + tol)


def h_c(cost, xs, ys_tuple):
    """Average cost to the points ``ys_tuple``: ``(1/n) sum_k c(x, y_k)`` on ``xs``."""
    return np.mean(cost.matrix(xs, np.asarray(ys_tuple, dtype=float)), axis=1)


def average_supergradient(cost, x0, ys, grid=None, tol=1e-9):
    """Supergradient of ``h_c`` at ``x0`` solving ``c_x(x0, u) = mean_k c_x(x0, y_k)``.

    Closed forms cover squared and power costs (also for vector points);
    other differentiable costs use a bracketed root find. When ``grid``
    (points of E1) is given, the defining infimum is checked on it and a
    :class:`SupergradientWarning` is issued if it fails.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.shape[0] == 0:
        raise ValidationError("ys must be nonempty")
    if not cost.differentiable:
        raise InversionError(f"{cost.kind} cost has no gradient to invert")
    x0 = np.asarray(x0, dtype=float)
    vector = ys.ndim == 2 and ys.shape[1] > 1 and cost.kind != "averaged"
    if cost.kind == "squared":
        u0 = ys.mean(axis=0)
    elif vector:
        if cost.kind != "ppower":
            raise InversionError(f"vector supergradient not available for {cost.kind}")
        cost.check_domain(x0, ys)
        d = x0[None, :] - ys
        r = np.linalg.norm(d, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(r > 0, r ** (cost.p - 2) * d, 0.0)
        h = g.mean(axis=0)
        nh = np.linalg.norm(h)
        u0 = x0 if nh == 0 else x0 - nh ** (1.0 / (cost.p - 1) - 1.0) * h
    else:
        target = np.mean(cost.c_x(x0, ys), axis=0)
        u0 = cost.eta(x0, target)
    if grid is not None:
        ok, slack = check_supergradient(cost, x0, ys, u0, grid, tol)
        if not ok:
            warnings.warn(
                f"candidate supergradient at x0={x0} violates the infimum by {slack:.3g}",
                SupergradientWarning,
                stacklevel=2,
            )
    return u0 if u0.ndim else float(u0)


def first_order_residual(cost, x0, ys, u0):
    """``|c_x(x0, u0) - mean_k c_x(x0, y_k)|`` (scalar or max-norm for vectors)."""
    ys = np.asarray(ys, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if ys.ndim == 2 and ys.shape[1] > 1 and cost.kind == "ppower":
        def grad(y):
            d = x0 - y
            r = np.linalg.norm(d)
            return r ** (cost.p - 2) * d if r > 0 else 0 * d
        lhs = grad(u0)
        rhs = np.mean([grad(y) for y in ys], axis=0)
    elif ys.ndim == 2 and ys.shape[1] > 1:
        lhs = cost.c_x(x0, u0)
        rhs = np.mean([cost.c_x(x0, y) for y in ys], axis=0)
    else:
        lhs = cost.c_x(x0, u0)
        rhs = np.mean(cost.c_x(x0, ys))
    return float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs))))


def check_supergradient(cost, x0, ys, u0, grid, tol=1e-9):
    """Check ``c(x0,u0) - h_c(x0) <= c(z,u0) - h_c(z)`` for z on ``grid``.

    Returns ``(ok, worst_slack)``; slack is how far the inequality fails.
    """
    grid = np.asarray(grid, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    pts = np.concatenate([x0.reshape(1, *grid.shape[1:]), grid], axis=0)
    u = np.asarray(u0, dtype=float).reshape(1, *grid.shape[1:])
    lhs = cost.matrix(pts, u)[:, 0] - h_c(cost, pts, ys)
    slack = float(lhs[0] - np.min(lhs[1:]))
    return slack <= tol * (1.0 + abs(lhs[0])), slack
