"""Cost functions c(x, y) with derivative oracles.

Calling a cost evaluates it elementwise on scalar arguments. Point lists
with coordinates on the last axis go through :meth:`CostSpec.matrix`,
which uses the vector form (``||x - y||`` based) when m > 1.
"""

import math

import numpy as np
from scipy.optimize import brentq

from ..errors import CostDomainError, InversionError, SingularityError, ValidationError
from . import fd

ORDERS = ("x", "y", "xy", "xx", "yy", "xxy", "xyy", "xxyy")


def _interval(dom):
    if dom is None:
        return None
    lo, hi = (float(v) for v in dom)
    if not lo < hi:
        raise ValidationError(f"empty interval {dom!r}")
    return (lo, hi)


def _inside(values, dom):
    if dom is None:
        return True
    lo, hi = dom
    v = np.asarray(values, dtype=float)
    ok = np.ones(v.shape, dtype=bool)
    if math.isfinite(lo):
        ok &= v > lo
    if math.isfinite(hi):
        ok &= v < hi
    return bool(np.all(ok))


def _disjoint(e1, e2):
    return max(e1[0], e2[0]) >= min(e1[1], e2[1])


class CostSpec:
    """Base class; subclasses implement ``_eval`` (elementwise) and optionally
    ``_eval_vec`` (last axis = coordinates), ``_grad_x``, ``_eta``, ``_analytic``.
    """

    kind = "abstract"
    differentiable = True
    supports_vectors = False

    def __init__(self, e1=None, e2=None):
        self.e1 = _interval(e1)
        self.e2 = _interval(e2)

    def check_domain(self, x, y):
        if not _inside(x, self.e1):
            raise CostDomainError(f"{self.kind} cost: x outside E1={self.e1}")
        if not _inside(y, self.e2):
            raise CostDomainError(f"{self.kind} cost: y outside E2={self.e2}")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.check_domain(x, y)
        return self._eval(x, y)

    def matrix(self, xs, ys):
        """Cost matrix between point lists of shape (N,) / (N, m) and (M,) / (M, m)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim == 2 and xs.shape[1] == 1:
            xs = xs[:, 0]
        if ys.ndim == 2 and ys.shape[1] == 1:
            ys = ys[:, 0]
        if xs.ndim == 1 and ys.ndim == 1:
            return self(xs[:, None], ys[None, :])
        if xs.ndim != 2 or ys.ndim != 2 or xs.shape[1] != ys.shape[1]:
            raise ValidationError("point lists must share the same dimension")
        if not self.supports_vectors:
            raise ValidationError(f"{self.kind} cost is scalar; got vector points")
        self.check_domain(xs, ys)
        return self._eval_vec(xs[:, None, :], ys[None, :, :])

    def window_matrix(self, X, Y):
        """Per-coordinate average cost between windows X (N, n, m) and Y (M, n, m)."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if X.shape[1] != Y.shape[1]:
            raise ValidationError("window lengths differ")
        acc = np.zeros((X.shape[0], Y.shape[0]))
        for t in range(X.shape[1]):
            acc += self.matrix(X[:, t, :], Y[:, t, :])
        return acc / X.shape[1]

    def _eval(self, x, y):
        raise NotImplementedError

    def _eval_vec(self, x, y):
        raise NotImplementedError

    # derivatives (scalar arguments) ----------------------------------------

    def _analytic(self, order, x, y):
        return None

    def fd_scale(self, x, y):
        return min(1.0, max(abs(float(x) - float(y)), 1e-3))

    def derivative(self, order, x, y, method="auto"):
        """Partial derivative named by ``order`` (``"xxy"`` = d^3/dx^2 dy) at scalars."""
        if order not in ORDERS:
            raise ValidationError(f"unknown derivative order {order!r}")
        if not self.differentiable:
            raise ValidationError(f"{self.kind} cost has no derivatives")
        x, y = float(x), float(y)
        if method in ("auto", "analytic"):
            val = self._analytic(order, x, y)
            if val is not None:
                return float(val)
            if method == "analytic":
                raise ValidationError(f"no analytic {order!r} derivative for {self.kind}")
        return fd.mixed_derivative(
            lambda a, b: float(self._eval(a[0], b[0])),
            x,
            y,
            [1.0] * order.count("x"),
            [1.0] * order.count("y"),
            scale=self.fd_scale(x, y),
        )

    def c_x(self, x, y):
        """Elementwise x-derivative."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.check_domain(x, y)
        return self._grad_x(x, y)

    def _grad_x(self, x, y):
        return np.vectorize(lambda a, b: self.derivative("x", a, b))(x, y)

    def c_xy(self, x, y):
        return self.derivative("xy", x, y)

    def eta(self, x, u):
        """Elementwise inverse of ``y -> c_x(x, y)``."""
        out = self._eta(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
        if not np.all(np.isfinite(out)):
            raise InversionError(f"{self.kind}: gradient inversion produced non-finite values")
        return out

    def _eta(self, x, u):
        # safeguarded bracketing root find on y -> c_x(x, y) over E2
        if self.e2 is None or not all(math.isfinite(v) for v in self.e2):
            raise InversionError(f"{self.kind}: generic inversion needs a bounded E2")
        lo, hi = self.e2
        pad = 1e-9 * (hi - lo)

        def solve(x0, u0):
            g = lambda y: self.derivative("x", x0, y) - u0
            a, b = lo + pad, hi - pad
            if g(a) * g(b) > 0:
                raise InversionError(f"{self.kind}: no y in E2 with c_x({x0}, y) = {u0}")
            return brentq(g, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)

        return np.vectorize(solve, otypes=[float])(x, u)

    @property
    def invertible(self):
        return self.differentiable

    def describe(self):
        out = {"kind": self.kind}
        if self.e1 is not None:
            out["e1"] = list(self.e1)
        if self.e2 is not None:
            out["e2"] = list(self.e2)
        return out


class SquaredCost(CostSpec):
    """``s * ||x - y||^2`` with ``s = 1/2`` when ``half`` is set, else ``s = 1``."""

    kind = "squared"
    supports_vectors = True

    def __init__(self, half=False, e1=None, e2=None):
        super().__init__(e1, e2)
        self.half = bool(half)
        self.scale = 0.5 if self.half else 1.0

    def _eval(self, x, y):
        return self.scale * (x - y) ** 2

    def _eval_vec(self, x, y):
        return self.scale * np.sum((x - y) ** 2, axis=-1)

    def _grad_x(self, x, y):
        return 2.0 * self.scale * (x - y)

    def _eta(self, x, u):
        return x - u / (2.0 * self.scale)

    def _analytic(self, order, x, y):
        s = self.scale
        table = {"x": 2 * s * (x - y), "y": -2 * s * (x - y), "xy": -2 * s, "xx": 2 * s, "yy": 2 * s}
        return table.get(order, 0.0)

    def describe(self):
        return {**super().describe(), "half": self.half}


class PowerCost(CostSpec):
    """``|x - y|^p / p`` (``||x - y||^p / p`` for vector points).

    ``p < 2`` needs declared disjoint domains E1 and E2.
    """

    kind = "ppower"
    supports_vectors = True

    def __init__(self, p, e1=None, e2=None):
        super().__init__(e1, e2)
        self.p = float(p)
        if self.p <= 0:
            raise ValidationError("p must be positive; use LogCost for the p -> 0 limit")
        if self.p < 2:
            if self.e1 is None or self.e2 is None or not _disjoint(self.e1, self.e2):
                raise ValidationError("p < 2 requires declared disjoint domains E1 and E2")

    def _eval(self, x, y):
        return np.abs(x - y) ** self.p / self.p

    def _eval_vec(self, x, y):
        return np.linalg.norm(x - y, axis=-1) ** self.p / self.p

    def _grad_x(self, x, y):
        d = x - y
        return np.sign(d) * np.abs(d) ** (self.p - 1)

    def _eta(self, x, u):
        if self.p == 1:
            raise InversionError("p = 1: the gradient of |x - y| is not invertible")
        return x - np.sign(u) * np.abs(u) ** (1.0 / (self.p - 1))

    def _analytic(self, order, x, y):
        p = self.p
        d = x - y
        a = abs(d)
        s = math.copysign(1.0, d)
        if a == 0:
            return None
        return {
            "x": s * a ** (p - 1),
            "y": -s * a ** (p - 1),
            "xx": (p - 1) * a ** (p - 2),
            "yy": (p - 1) * a ** (p - 2),
            "xy": -(p - 1) * a ** (p - 2),
            "xxy": -(p - 1) * (p - 2) * s * a ** (p - 3),
            "xyy": (p - 1) * (p - 2) * s * a ** (p - 3),
            "xxyy": (p - 1) * (p - 2) * (p - 3) * a ** (p - 4),
        }[order]

    def describe(self):
        return {**super().describe(), "p": self.p}


class LogCost(CostSpec):
    """``log|x - y|`` on declared disjoint intervals."""

    kind = "log"

    def __init__(self, e1, e2):
        super().__init__(e1, e2)
        if self.e1 is None or self.e2 is None or not _disjoint(self.e1, self.e2):
            raise ValidationError("log cost requires declared disjoint domains E1 and E2")

    def _eval(self, x, y):
        d = np.abs(x - y)
        if np.any(d == 0):
            raise CostDomainError("log cost undefined at coincident points")
        return np.log(d)

    def _grad_x(self, x, y):
        return 1.0 / (x - y)

    def _eta(self, x, u):
        if np.any(u == 0):
            raise InversionError("log cost: c_x never vanishes")
        return x - 1.0 / u

    def _analytic(self, order, x, y):
        d = x - y
        return {
            "x": 1 / d,
            "y": -1 / d,
            "xx": -1 / d**2,
            "yy": -1 / d**2,
            "xy": 1 / d**2,
            "xxy": -2 / d**3,
            "xyy": 2 / d**3,
            "xxyy": -6 / d**4,
        }[order]


class HammingCost(CostSpec):
    """Discrete metric: 0 on equal points, 1 otherwise."""

    kind = "hamming"
    differentiable = False
    supports_vectors = True

    def _eval(self, x, y):
        return (x != y).astype(float)

    def _eval_vec(self, x, y):
        return np.any(x != y, axis=-1).astype(float)

    def _eta(self, x, u):
        raise InversionError("hamming cost has no gradient")


class TabulatedCost(CostSpec):
    """Cost given by a table on a finite grid E1 x E2; lookups off the grid fail."""

    kind = "tabulated"
    differentiable = False

    def __init__(self, xs, ys, values):
        super().__init__()
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (self.xs.size, self.ys.size):
            raise ValidationError("tabulated cost values must have shape (len(xs), len(ys))")

    @staticmethod
    def _lookup(grid, pts, which):
        eq = pts[..., None] == grid
        if not np.all(eq.any(axis=-1)):
            raise CostDomainError(f"tabulated cost: {which} off the grid")
        return eq.argmax(axis=-1)

    def _eval(self, x, y):
        x, y = np.broadcast_arrays(x, y)
        return self.values[self._lookup(self.xs, x, "x"), self._lookup(self.ys, y, "y")]

    def _eta(self, x, u):
        raise InversionError("tabulated cost has no gradient")

    def describe(self):
        return {"kind": self.kind, "xs": self.xs.tolist(), "ys": self.ys.tolist()}


class AveragedCost(CostSpec):
    """``c_n(x, y) = (1/n) sum_k c(x_k, y_k)``; points are n-vectors on the last axis."""

    kind = "averaged"
    supports_vectors = True

    def __init__(self, base, n):
        super().__init__(base.e1, base.e2)
        self.base = base
        self.n = int(n)
        self.differentiable = base.differentiable

    def check_domain(self, x, y):
        self.base.check_domain(x, y)

    def _eval(self, x, y):
        return np.mean(self.base._eval(x, y), axis=-1)

    def matrix(self, xs, ys):
        xs = np.asarray(xs, dtype=float).reshape(-1, self.n)
        ys = np.asarray(ys, dtype=float).reshape(-1, self.n)
        self.check_domain(xs, ys)
        return self._eval(xs[:, None, :], ys[None, :, :])

    def _grad_x(self, x, y):
        return self.base._grad_x(x, y) / self.n

    def _eta(self, x, u):
        return self.base._eta(x, self.n * u)

    def describe(self):
        return {"kind": self.kind, "n": self.n, "base": self.base.describe()}


def make_cost(spec):
    """Build a cost from a plain mapping such as ``{"kind": "ppower", "p": 4}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "squared":
            return SquaredCost(**spec)
        if kind == "ppower":
            return PowerCost(**spec)
        if kind == "log":
            return LogCost(**spec)
        if kind == "hamming":
            return HammingCost(**spec)
        if kind == "tabulated":
            return TabulatedCost(**spec)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {kind} cost: {exc}") from None
    raise ValidationError(f"unknown cost kind {kind!r}")


def require_invertible(cost, x, y):
    """Raise SingularityError when ``c_{x,y}`` vanishes at scalar (x, y)."""
    if cost.kind == "squared":
        return
    val = cost.c_xy(x, y)
    if not math.isfinite(val) or abs(val) < 1e-14:
        raise SingularityError(f"c_xy = {val} at x={x}, y={y}")
