"""Exact discrete optimal transport.

The linear program ``min <C, gamma>`` over couplings of two probability
vectors is solved with a transportation simplex (tree basis, u-v duals).
The inner loop lives in a compiled extension when it is available; set
``STATCOUPLING_PURE_PYTHON=1`` to force the pure-Python kernel.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import _simplex_py
from .errors import ValidationError

try:
    if os.environ.get("STATCOUPLING_PURE_PYTHON"):
        raise ImportError("pure python requested")
    from . import _simplex as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
MAX_CELLS = 10**7
MARGINAL_TOL = 1e-9


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]


def _kernel(backend):
    if backend is None:
        backend = BACKEND
    if backend == "cython":
        if _compiled is None:
            raise ValidationError("compiled kernel is not available")
        return _compiled.transport_simplex
    if backend == "python":
        return _simplex_py.transport_simplex
    raise ValidationError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class TransportPlan:
    """An optimal coupling together with its dual certificate.

    ``row_potential`` and ``col_potential`` are dual feasible
    (``u_i + v_j <= C_ij``), so ``cost - dual_value`` bounds the
    suboptimality of ``mass``.
    """

    mass: np.ndarray
    cost: float
    row_potential: np.ndarray
    col_potential: np.ndarray
    dual_value: float
    iterations: int
    backend: str

    @property
    def duality_gap(self):
        return self.cost - self.dual_value

    def certified(self, rtol=1e-9):
        return abs(self.duality_gap) <= rtol * (1.0 + abs(self.cost))


def _check_pmf(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-d probability vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > MARGINAL_TOL:
        raise ValidationError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def _check_problem(cost_matrix, left, right):
    C = np.asarray(cost_matrix, dtype=float)
    a = _check_pmf(left, "left")
    b = _check_pmf(right, "right")
    if C.shape != (a.size, b.size):
        raise ValidationError(
            f"cost matrix shape {C.shape} does not match marginals ({a.size}, {b.size})"
        )
    if not np.all(np.isfinite(C)):
        raise ValidationError("cost matrix has non-finite entries")
    if C.size > MAX_CELLS:
        raise ValidationError(f"{C.size} cells exceeds the {MAX_CELLS} cell limit")
    if abs(a.sum() - b.sum()) > MARGINAL_TOL:
        raise ValidationError("marginal totals differ")
    return C, a, b


def solve_exact(cost_matrix, left, right, backend=None):
    """Optimal transport plan between ``left`` and ``right`` for ``cost_matrix``.

    Rows and columns carrying zero mass are dropped before pivoting and
    get feasible duals afterwards. Ties are broken toward the lowest
    flat cell index, so the output is deterministic.
    """
    C, a, b = _check_problem(cost_matrix, left, right)
    b = b * (a.sum() / b.sum())
    ri = np.flatnonzero(a > 0)
    ci = np.flatnonzero(b > 0)
    sub = C[np.ix_(ri, ci)]
    rows, cols, flows, u_sub, v_sub, iters = _kernel(backend)(sub, a[ri], b[ci])

    mass = np.zeros_like(C)
    np.add.at(mass, (ri[rows], ci[cols]), flows)

    # lift basis duals to a dual-feasible pair on the full matrix
    v = np.empty(C.shape[1])
    u = np.empty(C.shape[0])
    u[ri] = u_sub
    v[ci] = np.min(C[ri][:, ci] - u_sub[:, None], axis=0)
    zero_c = np.setdiff1d(np.arange(C.shape[1]), ci)
    if zero_c.size:
        v[zero_c] = np.min(C[ri][:, zero_c] - u_sub[:, None], axis=0)
    zero_r = np.setdiff1d(np.arange(C.shape[0]), ri)
    if zero_r.size:
        u[zero_r] = np.min(C[zero_r] - v[None, :], axis=1)

    cost = float(np.sum(mass * C))
    dual = float(a @ u + b @ v)
    return TransportPlan(
        mass=mass,
        cost=cost,
        row_potential=u,
        col_potential=v,
        dual_value=dual,
        iterations=int(iters),
        backend=backend or BACKEND,
    )


def independent_product_cost(cost_matrix, left, right):
    """Cost of the product coupling, ``left^T C right``."""
    C, a, b = _check_problem(cost_matrix, left, right)
    return float(a @ C @ b)


def disjointify(left, right):
    """Remove the common part ``min(left, right)`` and renormalize.

    Returns ``(left', right', a)`` with ``a = 1 - sum(min(left, right))``
    so that ``left = a * left' + min(left, right)``.
    """
    p = _check_pmf(left, "left")
    q = _check_pmf(right, "right")
    if p.shape != q.shape:
        raise ValidationError("left and right must live on the same support")
    common = np.minimum(p, q)
    a = 1.0 - float(common.sum())
    if a <= 0.0:
        raise ValidationError("zero residual mass: left and right coincide")
    return (p - common) / a, (q - common) / a, a
