"""Equivariant sliding block codes built from convex or c_n-concave potentials."""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import enumeration_cap
from .ctools.transforms import SupergradientWarning, check_supergradient
from .errors import (
    EnumerationTooLarge,
    NotCConcaveError,
    NumericCheckFailed,
    ValidationError,
)
from .model import window_index_probs

CONVEXITY_TOL = 1e-10
PROBE_SLACK = 1e-8


def _batch(X, n, m):
    """Coerce a point or a batch of points to shape (B, n, m)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and m == 1 and X.shape[0] == n:
        X = X[None, :, None]
    elif X.ndim == 2 and X.shape == (n, m):
        X = X[None]
    elif X.ndim == 2 and m == 1 and X.shape[1] == n:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[1:] != (n, m):
        raise ValidationError(f"expected points of shape ({n}, {m}), got {X.shape}")
    return X


# potentials ------------------------------------------------------------------


class Potential:
    """A function on ``(R^m)^n``; subclasses supply batched ``value`` and ``grad``.

    ``value`` maps (B, n, m) to (B,) and ``grad`` maps (B, n, m) to (B, n, m).
    """

    form = "abstract"

    def __init__(self, n, m=1):
        if int(n) < 1 or int(m) < 1:
            raise ValidationError("potential order n and dimension m must be >= 1")
        self.n = int(n)
        self.m = int(m)

    def value(self, X):
        raise NotImplementedError

    def grad(self, X):
        raise NotImplementedError

    def __call__(self, x):
        return float(self.value(_batch(x, self.n, self.m))[0])

    def is_convex(self):
        """True, False, or None when convexity is not known structurally."""
        return None

    def describe(self):
        return {"form": self.form, "n": self.n, "m": self.m}


class Quadratic(Potential):
    """``f(x) = 1/2 x^T A x`` on the flattened ``n*m`` coordinates.

    Convexity is not required here, so the same form can carry
    c_n-concave potentials; :func:`build_code` rejects indefinite ``A``.
    """

    form = "quadratic"

    def __init__(self, A, n=None, m=1):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValidationError("quadratic form matrix must be square")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise ValidationError("quadratic form matrix must be symmetric")
        if n is None:
            n = A.shape[0] // m
        if A.shape[0] != n * m:
            raise ValidationError(f"matrix size {A.shape[0]} != n*m = {n * m}")
        super().__init__(n, m)
        self.A = 0.5 * (A + A.T)

    @classmethod
    def cross_term(cls, eps):
        """``x0^2/4 + eps x0 x1 + x1^2/4``, whose code is ``x_0 + eps (x_{-1} + x_1)``."""
        return cls([[0.5, eps], [eps, 0.5]])

    def value(self, X):
        X = _batch(X, self.n, self.m).reshape(-1, self.n * self.m)
        return 0.5 * np.einsum("bi,ij,bj->b", X, self.A, X)

    def grad(self, X):
        B = _batch(X, self.n, self.m)
        return (B.reshape(len(B), -1) @ self.A).reshape(B.shape)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.A)[0])

    def is_convex(self):
        return self.min_eigenvalue() >= -CONVEXITY_TOL

    def describe(self):
        return {**super().describe(), "A": self.A.tolist()}


@dataclass(frozen=True)
class Piece:
    """A scalar function with one-sided derivatives."""

    name: str
    value: object = field(repr=False)
    left: object = field(repr=False)
    right: object = field(repr=False)
    convex: bool = True
    params: dict = field(default_factory=dict)

    def subgradient(self, x):
        # midpoint of the one-sided derivatives (the minimal-norm choice at kinks)
        return 0.5 * (self.left(x) + self.right(x))


def piece(name, **params):
    """Named univariate piece: square, abs, power, linear, huber."""
    a = float(params.get("a", 1.0))
    c = float(params.get("center", 0.0))
    if name == "square":
        d = lambda x: a * (x - c)
        return Piece(name, lambda x: 0.5 * a * (x - c) ** 2, d, d, a >= 0, params)
    if name == "linear":
        b = float(params.get("b", 0.0))
        d = lambda x: np.full_like(np.asarray(x, dtype=float), a)
        return Piece(name, lambda x: a * x + b, d, d, True, params)
    if name == "abs":
        left = lambda x: np.where(np.asarray(x) > c, a, -a)
        right = lambda x: np.where(np.asarray(x) >= c, a, -a)
        return Piece(name, lambda x: a * np.abs(x - c), left, right, a >= 0, params)
    if name == "power":
        p = float(params.get("p", 2.0))
        if p < 1:
            raise ValidationError("power piece needs p >= 1")
        d = lambda x: a * np.sign(x - c) * np.abs(x - c) ** (p - 1)
        if p == 1:
            return piece("abs", a=a, center=c)
        return Piece(name, lambda x: a * np.abs(x - c) ** p / p, d, d, a >= 0, params)
    if name == "huber":
        k = float(params.get("k", 1.0))
        d = lambda x: a * np.clip(x - c, -k, k)
        val = lambda x: a * np.where(np.abs(x - c) <= k, 0.5 * (x - c) ** 2, k * np.abs(x - c) - 0.5 * k * k)
        return Piece(name, val, d, d, a >= 0 and k > 0, params)
    if name == "cost_slice":
        raise ValidationError("cost_slice pieces are built with cost_slice_piece()")
    raise ValidationError(f"unknown univariate piece {name!r}")


def cost_slice_piece(cost, y0, shift=0.0):
    """The c-concave piece ``x -> c(x, y0) - shift`` (differentiable costs)."""
    y0 = float(y0)
    d = lambda x: cost.c_x(x, np.full_like(np.asarray(x, dtype=float), y0))
    val = lambda x: cost(x, np.full_like(np.asarray(x, dtype=float), y0)) - shift
    return Piece("cost_slice", val, d, d, False, {"y0": y0, "shift": shift, "cost": cost.describe()})


class SumOfUnivariate(Potential):
    """``f(x) = weight * sum_k f_k(x_k)`` for scalar coordinates.

    ``weight=1/n`` (see :meth:`averaged`) gives the normalization under which
    c-concave pieces make ``f`` concave for the averaged cost ``c_n``.
    """

    form = "sum_of_univariate"

    def __init__(self, pieces, weight=1.0):
        pieces = [p if isinstance(p, Piece) else piece(**p) for p in pieces]
        if not pieces:
            raise ValidationError("need at least one piece")
        super().__init__(len(pieces), 1)
        self.pieces = pieces
        self.weight = float(weight)

    @classmethod
    def averaged(cls, pieces):
        return cls(pieces, weight=1.0 / len(pieces))

    def value(self, X):
        X = _batch(X, self.n, 1)[:, :, 0]
        return self.weight * sum(p.value(X[:, k]) for k, p in enumerate(self.pieces))

    def grad(self, X):
        X = _batch(X, self.n, 1)[:, :, 0]
        G = np.stack([p.subgradient(X[:, k]) for k, p in enumerate(self.pieces)], axis=1)
        return (self.weight * G)[:, :, None]

    def is_convex(self):
        return self.weight >= 0 and all(p.convex for p in self.pieces)

    def describe(self):
        return {
            **super().describe(),
            "weight": self.weight,
            "pieces": [{"name": p.name, **{k: v for k, v in p.params.items()}} for p in self.pieces],
        }


_MEAN_FUNCTIONS = {
    "identity": (lambda t: t, lambda t: np.ones_like(t), lambda t: np.zeros_like(t)),
    "xi_plus_sqrt": (
        lambda t: t + np.sqrt(t),
        lambda t: 1.0 + 0.5 / np.sqrt(t),
        lambda t: -0.25 * t ** (-1.5),
    ),
}


class MeanBased(Potential):
    """``f(x) = A(mean(x))`` with ``A' >= 1`` and ``A'' <= 0`` on ``validation_grid``."""

    form = "mean_based"

    def __init__(self, A, n, validation_grid=None):
        if isinstance(A, str):
            if A not in _MEAN_FUNCTIONS:
                raise ValidationError(f"unknown mean function {A!r}")
            self.A_name = A
            self.A, self.dA, self.d2A = _MEAN_FUNCTIONS[A]
        else:
            self.A_name = "custom"
            self.A, self.dA, self.d2A = A
        super().__init__(n, 1)
        grid = np.linspace(1e-3, 1 - 1e-3, 201) if validation_grid is None else np.asarray(validation_grid, float)
        d1, d2 = self.dA(grid), self.d2A(grid)
        if np.any(d1 < 1 - 1e-12):
            raise ValidationError("mean-based potential needs A' >= 1 on the validation grid")
        if np.any(d2 > 1e-12):
            raise ValidationError("mean-based potential needs A'' <= 0 on the validation grid")
        self._affine = bool(np.all(np.abs(d2) <= 1e-12))

    def value(self, X):
        X = _batch(X, self.n, 1)[:, :, 0]
        return self.A(X.mean(axis=1))

    def grad(self, X):
        X = _batch(X, self.n, 1)[:, :, 0]
        g = self.dA(X.mean(axis=1)) / self.n
        return np.repeat(g[:, None], self.n, axis=1)[:, :, None]

    def is_convex(self):
        # A'' <= 0 was enforced, so f is convex only when A is affine
        return self._affine

    def describe(self):
        return {**super().describe(), "A": self.A_name}


class Tabulated(Potential):
    """Values of ``f`` on the product grid ``grid^n`` (scalar coordinates).

    Without an explicit selection the subgradient is the midpoint of the
    one-sided difference quotients along each axis.
    """

    form = "tabulated"

    def __init__(self, grid, values, subgradients=None):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise ValidationError("tabulation grid must be strictly increasing with >= 2 points")
        n = values.ndim
        if values.shape != (len(grid),) * n:
            raise ValidationError("values must have shape (len(grid),) * n")
        super().__init__(n, 1)
        self.grid = grid
        self.values = values
        if subgradients is None:
            subgradients = self._midpoint_selection()
        subgradients = np.asarray(subgradients, dtype=float)
        if subgradients.shape != values.shape + (n,):
            raise ValidationError("subgradients must have shape values.shape + (n,)")
        self.subgradients = subgradients

    def _midpoint_selection(self):
        out = []
        h = np.diff(self.grid)
        for k in range(self.n):
            v = np.moveaxis(self.values, k, -1)
            q = np.diff(v, axis=-1) / h
            left = np.concatenate([q[..., :1], q], axis=-1)
            right = np.concatenate([q, q[..., -1:]], axis=-1)
            out.append(np.moveaxis(0.5 * (left + right), -1, k))
        return np.stack(out, axis=-1)

    def _locate(self, X):
        X = _batch(X, self.n, 1)[:, :, 0]
        pos = np.searchsorted(self.grid, X)
        pos = np.clip(pos, 0, len(self.grid) - 1)
        if not np.all(self.grid[pos] == X):
            raise ValidationError("tabulated potential evaluated off its grid (no interpolation)")
        return tuple(pos.T)

    def value(self, X):
        return self.values[self._locate(X)]

    def grad(self, X):
        return self.subgradients[self._locate(X)][:, :, None]

    def is_convex(self):
        # judged with the midpoint selection, which is a subgradient of any
        # discretely convex table; a user-supplied selection is probed separately
        ref = Tabulated(self.grid, self.values)
        return subgradient_violation(ref, _grid_points(self.grid, self.n)) <= PROBE_SLACK

    def describe(self):
        return {**super().describe(), "grid": self.grid.tolist()}


def _grid_points(grid, n):
    mesh = np.stack(np.meshgrid(*([grid] * n), indexing="ij"), axis=-1)
    return mesh.reshape(-1, n)[:, :, None]


class CConcaveCounterpart(Potential):
    """``f = a |x|^2 - b phi`` pairing a convex ``phi`` with a squared cost.

    Full squared cost uses ``a = 1/n, b = 2``; the half convention uses
    ``a = 1/(2n), b = 1``. The c-code of ``f`` equals the convex code of ``phi``.
    """

    form = "c_concave_counterpart"

    def __init__(self, phi, half=False):
        super().__init__(phi.n, phi.m)
        self.phi = phi
        self.half = bool(half)
        self.a = 1.0 / (2 * phi.n) if half else 1.0 / phi.n
        self.b = 1.0 if half else 2.0

    def value(self, X):
        X = _batch(X, self.n, self.m)
        return self.a * np.sum(X**2, axis=(1, 2)) - self.b * self.phi.value(X)

    def grad(self, X):
        X = _batch(X, self.n, self.m)
        return 2 * self.a * X - self.b * self.phi.grad(X)

    def describe(self):
        return {**super().describe(), "half": self.half, "phi": self.phi.describe()}


def c_concave_counterpart(phi, cost):
    if cost.kind != "squared":
        raise ValidationError("the convex/c-concave correspondence is implemented for squared cost only")
    return CConcaveCounterpart(phi, half=cost.half)


# subgradients ----------------------------------------------------------------


def subgradient_violation(potential, probes, points=None):
    """Largest ``F(x).(z - x) - (f(z) - f(x))`` over points x and probes z."""
    probes = _batch(probes, potential.n, potential.m)
    points = probes if points is None else _batch(points, potential.n, potential.m)
    fz = potential.value(probes)
    fx = potential.value(points)
    G = potential.grad(points).reshape(len(points), -1)
    D = probes.reshape(len(probes), -1)[None, :, :] - points.reshape(len(points), -1)[:, None, :]
    lin = np.einsum("xi,xzi->xz", G, D)
    return float(np.max(lin - (fz[None, :] - fx[:, None])))


def subgradient(potential, x, probes=64, seed=0, check=True):
    """A subgradient of a convex potential at ``x``, probe-validated to 1e-8 slack."""
    X = _batch(x, potential.n, potential.m)
    if len(X) != 1:
        raise ValidationError("subgradient expects a single point")
    g = potential.grad(X)[0]
    if check and (potential.is_convex() or isinstance(potential, Tabulated)):
        if isinstance(potential, Tabulated):
            Z = _grid_points(potential.grid, potential.n)
        else:
            rng = np.random.default_rng(seed)
            scale = 1.0 + np.max(np.abs(X))
            Z = X + scale * rng.standard_normal((probes,) + X.shape[1:])
            if isinstance(potential, MeanBased):
                Z = np.abs(Z)
        viol = subgradient_violation(potential, Z, X)
        if viol > PROBE_SLACK:
            raise NumericCheckFailed(f"subgradient inequality fails by {viol:.3g}")
    x_in = np.asarray(x, dtype=float)
    return g[:, 0] if potential.m == 1 and x_in.ndim == 1 else g


# codes -----------------------------------------------------------------------


class SlidingBlockCode:
    """Output at time t depends only on the window ``x_{t-r}, ..., x_{t+r}``.

    ``fn`` maps a batch of windows (B, 2r+1, m_in) to outputs (B, m_out).
    Tables over a finite alphabet are built lazily and cached.
    """

    def __init__(self, radius, fn, out_dim=1, name="code", validator=None):
        if int(radius) < 0:
            raise ValidationError("radius must be >= 0")
        self.radius = int(radius)
        self.fn = fn
        self.out_dim = int(out_dim)
        self.name = name
        self.validator = validator
        self._tables = {}

    @property
    def width(self):
        return 2 * self.radius + 1

    def __call__(self, window):
        W = np.asarray(window, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        if W.shape[0] != self.width:
            raise ValidationError(f"window must have length {self.width}")
        out = self.fn(W[None])[0]
        return float(out[0]) if self.out_dim == 1 else out

    def table(self, alphabet, cap=None):
        """Outputs on all windows, shape ``(K,)*(2r+1) + (out_dim,)``."""
        key = alphabet.symbols.tobytes() + bytes(str(alphabet.symbols.shape), "ascii")
        if key in self._tables:
            return self._tables[key]
        K = alphabet.size
        needed = K**self.width
        limit = enumeration_cap(cap)
        if needed > limit:
            raise EnumerationTooLarge(needed, limit, "code table")
        idx = np.indices((K,) * self.width).reshape(self.width, -1).T
        W = alphabet.symbols[idx]
        out = np.asarray(self.fn(W), dtype=float).reshape(len(W), self.out_dim)
        if self.validator is not None:
            self.validator(alphabet, idx, W, out)
        table = out.reshape((K,) * self.width + (self.out_dim,))
        table.setflags(write=False)
        self._tables[key] = table
        return table

    def __repr__(self):
        return f"SlidingBlockCode(name={self.name!r}, radius={self.radius}, out_dim={self.out_dim})"


def identity_code(m=1):
    return SlidingBlockCode(0, lambda W: W[:, 0, :], m, name="identity")


def constant_code(value=0.0, m=1):
    return SlidingBlockCode(0, lambda W: np.full((len(W), m), float(value)), m, name="constant")


def _subwindow_grads(potential, W):
    """Yield ``(k, grad f)`` at the n-window starting at offset ``-k`` of each window."""
    n, r = potential.n, potential.n - 1
    for k in range(n):
        yield k, potential.grad(W[:, r - k : r - k + n, :])


def build_code(potential):
    """Code ``S_0(x) = sum_k d_k f(x_{-k}, ..., x_{-k+n-1})`` of a convex potential."""
    if potential.is_convex() is False:
        raise ValidationError(f"{potential.form} potential is not convex")

    def fn(W):
        out = np.zeros((len(W), potential.m))
        for k, g in _subwindow_grads(potential, W):
            out += g[:, k, :]
        return out

    return SlidingBlockCode(potential.n - 1, fn, potential.m, name=f"convex:{potential.form}")


def c_supergradient_map(potential, cost, X):
    """First-order c_n-supergradient ``y_k = eta(x_k, n d_k f(x))`` for windows X (B, n, 1)."""
    G = potential.grad(X)[:, :, 0]
    return cost.eta(X[:, :, 0], potential.n * G)


def _probe_grid(cost, symbols, points=201):
    lo, hi = float(np.min(symbols)), float(np.max(symbols))
    span = max(hi - lo, 1.0)
    lo, hi = lo - 0.5 * span, hi + 0.5 * span
    if cost.e1 is not None:
        a, b = cost.e1
        pad = 1e-6 * (min(b, hi) - max(a, lo))
        lo, hi = max(lo, a + pad), min(hi, b - pad)
    return np.linspace(lo, hi, points)


def build_c_code(potential, cost, source=None, grid_points=201, tol=1e-9):
    """Code from a c_n-concave potential: ``S_0(x) = u0(x_0; F_0, ..., F_{n-1})``.

    ``F_k`` is the c_n-supergradient of ``f`` at the n-window starting at
    offset ``-k`` and ``u0`` solves the first-order condition for the
    supergradient of ``h_c``. When a table is built, the supergradient
    inequalities are verified on the support of ``source`` (all windows
    if no source is given): failures raise NotCConcaveError, and failures
    on zero-probability windows only warn.
    """
    if potential.m != 1:
        raise ValidationError("build_c_code supports scalar coordinates")
    if cost.kind != "squared" and not cost.invertible:
        raise ValidationError(f"{cost.kind} cost has no invertible x-gradient")
    n, r = potential.n, potential.n - 1

    def targets(W):
        ys = []
        for k in range(n):
            ys.append(c_supergradient_map(potential, cost, W[:, r - k : r - k + n, :])[:, k])
        return np.stack(ys, axis=1)

    def fn(W):
        ys = targets(W)
        if cost.kind == "squared":
            return ys.mean(axis=1, keepdims=True)
        x0 = W[:, r, 0]
        u = np.mean(cost.c_x(x0[:, None], ys), axis=1)
        return cost.eta(x0, u)[:, None]

    def validator(alphabet, idx, W, out):
        _verify_c_code(potential, cost, source, alphabet, idx, W, out, targets, grid_points, tol)

    return SlidingBlockCode(r, fn, 1, name=f"c:{potential.form}", validator=validator)


def _verify_c_code(potential, cost, source, alphabet, idx, W, out, targets, grid_points, tol):
    n, r = potential.n, potential.n - 1
    K = alphabet.size
    if source is not None:
        if source.alphabet.symbols.shape != alphabet.symbols.shape or not np.array_equal(
            source.alphabet.symbols, alphabet.symbols
        ):
            raise ValidationError("source alphabet differs from the table alphabet")
        sup_idx, _ = window_index_probs(source, 2 * r + 1)
        flat = np.ravel_multi_index(tuple(sup_idx.T), (K,) * (2 * r + 1))
        on_support = np.zeros(len(W), dtype=bool)
        on_support[flat] = True
    else:
        on_support = np.ones(len(W), dtype=bool)
    grid = _probe_grid(cost, alphabet.symbols)
    # c_n-supergradient inequality for every n-window (probe: grid^n when small, else the alphabet)
    wins = W[:, r : r + n, :]
    ys = c_supergradient_map(potential, cost, wins)
    if cost.e2 is not None:
        cost.check_domain(wins[:, :, 0], ys)
    probe_1d = grid if len(grid) ** n <= 20000 else np.unique(alphabet.symbols[:, 0])
    Z = np.stack(np.meshgrid(*([probe_1d] * n), indexing="ij"), axis=-1).reshape(-1, n)
    Z = np.concatenate([Z, wins[:, :, 0]])
    fz = potential.value(Z[:, :, None])
    fx = potential.value(wins)
    own = np.mean(cost(wins[:, :, 0], ys), axis=1) - fx
    best = np.full(len(W), np.inf)
    for start in range(0, len(Z), 4096):
        z = Z[start : start + 4096]
        cz = np.mean(cost(z[None, :, :], ys[:, None, :]), axis=2) - fz[None, start : start + 4096]
        best = np.minimum(best, cz.min(axis=1))
    gap = own - best
    bad = gap > tol * (1.0 + np.abs(own))
    _report(bad, on_support, W, r, "c_n-supergradient of f")
    # supergradient of h_c at the code output
    ys_all = targets(W)
    bad = np.zeros(len(W), dtype=bool)
    for i in range(len(W)):
        ok, _ = check_supergradient(cost, W[i, r, 0], ys_all[i], out[i, 0], grid, tol)
        bad[i] = not ok
    _report(bad, on_support, W, r, "supergradient of h_c")


def _report(bad, on_support, W, r, what):
    hard = bad & on_support
    if np.any(hard):
        i = int(np.flatnonzero(hard)[0])
        raise NotCConcaveError(f"{what} does not exist at window {W[i, :, 0].tolist()}")
    soft = bad & ~on_support
    if np.any(soft):
        i = int(np.flatnonzero(soft)[0])
        warnings.warn(
            f"{what} fails off the support, e.g. at window {W[i, :, 0].tolist()}",
            SupergradientWarning,
            stacklevel=4,
        )


def apply_code(code, path):
    """Outputs at interior times ``r .. len-1-r``; length ``len(path) - 2r``."""
    P = np.asarray(path, dtype=float)
    scalar_in = P.ndim == 1
    if scalar_in:
        P = P[:, None]
    L, w = len(P), code.width
    if L < w:
        raise ValidationError(f"path of length {L} is shorter than the code window {w}")
    W = np.lib.stride_tricks.sliding_window_view(P, (w, P.shape[1]))[:, 0]
    out = np.asarray(code.fn(W), dtype=float)
    return out[:, 0] if code.out_dim == 1 else out


# coupling costs --------------------------------------------------------------


def _pair_cost(cost, x, y):
    if x.shape[1] == 1 and y.shape[1] == 1:
        return cost(x[:, 0], y[:, 0])
    cost.check_domain(x, y)
    return cost._eval_vec(x, y)


def coupling_cost_exact(source, code, cost, cap=None):
    """``E c(X_0, S_0(X))`` by enumerating all positive-probability code windows."""
    r = code.radius
    idx, prob = window_index_probs(source, 2 * r + 1, cap)
    K = source.alphabet.size
    table = code.table(source.alphabet, cap).reshape(K ** (2 * r + 1), -1)
    out = table[np.ravel_multi_index(tuple(idx.T), (K,) * (2 * r + 1))]
    centers = source.alphabet.symbols[idx[:, r]]
    return float(np.dot(prob / prob.sum(), _pair_cost(cost, centers, out)))


MC_SHARD = 1 << 16


def coupling_cost_mc(source, code, cost, samples, seed, jobs=1):
    """Monte Carlo estimate of :func:`coupling_cost_exact` with its standard error.

    Each sample is an independent stationary window, so the estimate is an
    i.i.d. mean. Shards use spawned seed streams; the result does not
    depend on ``jobs``.
    """
    samples = int(samples)
    if samples < 100:
        raise ValidationError("need at least 100 samples")
    r = code.radius
    K = source.alphabet.size
    table = code.table(source.alphabet).reshape(K ** (2 * r + 1), -1)
    sizes = [MC_SHARD] * (samples // MC_SHARD)
    if samples % MC_SHARD:
        sizes.append(samples % MC_SHARD)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def shard(args):
        size, ss = args
        idx = _sample_windows(source, size, 2 * r + 1, np.random.default_rng(ss))
        out = table[np.ravel_multi_index(tuple(idx.T), (K,) * (2 * r + 1))]
        vals = _pair_cost(cost, source.alphabet.symbols[idx[:, r]], out)
        mean = float(vals.mean())
        return size, mean, float(np.sum((vals - mean) ** 2))

    work = list(zip(sizes, streams))
    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(shard, work))
    else:
        parts = [shard(w) for w in work]
    # pairwise (Chan et al.) merge of count / mean / M2
    count, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        delta = mb - mean
        total = count + nb
        mean += delta * nb / total
        m2 += m2b + delta * delta * count * nb / total
        count = total
    var = m2 / (count - 1)
    return mean, math.sqrt(max(var, 0.0) / count)


def _sample_windows(source, count, length, rng):
    from .model import sample_windows

    return sample_windows(source, count, length, rng)


# AR inversion ----------------------------------------------------------------


def ar_roots(eps):
    """Roots ``z_+, z_-`` of ``eps z^2 + z + eps``; ``|z_+| < 1 < |z_-|``."""
    eps = float(eps)
    if eps == 0:
        raise ValidationError("eps = 0 has no roots (the code is the identity)")
    if abs(eps) >= 0.5:
        raise ValidationError("|eps| >= 0.5: potential not convex / roots on unit circle")
    s = math.sqrt(1.0 - 4.0 * eps * eps)
    zp = (-1.0 + s) / (2.0 * eps)
    zm = (-1.0 - s) / (2.0 * eps)
    if not abs(zp) < 1.0 < abs(zm):
        raise NumericCheckFailed("root separation |z+| < 1 < |z-| failed")
    return zp, zm


def ar_inverse_coefficients(eps, s_max):
    """Coefficients ``b_{-s_max}, ..., b_{s_max}`` inverting ``Y_t = X_t + eps(X_{t-1} + X_{t+1})``.

    ``b_s = z_+^{|s|} / (eps (z_+ - z_-))``. The convolution identity with the
    kernel ``(eps, 1, eps)`` is checked for ``|t| <= s_max - 2``.
    """
    s_max = int(s_max)
    if s_max < 0:
        raise ValidationError("s_max must be >= 0")
    if abs(float(eps)) >= 0.5:
        raise ValidationError("|eps| >= 0.5: potential not convex / roots on unit circle")
    s = np.arange(-s_max, s_max + 1)
    if eps == 0:
        return (s == 0).astype(float)
    zp, zm = ar_roots(eps)
    b = zp ** np.abs(s) / (eps * (zp - zm))
    resid = convolution_residual(b, eps, s_max - 2)
    if resid > 1e-8:
        raise NumericCheckFailed(f"convolution residual {resid:.3g} exceeds 1e-8")
    return b


def convolution_residual(b, eps, t_max):
    """``max_{|t| <= t_max} |sum_s b_s k_{t-s} - delta_{t0}|`` with ``k = (eps, 1, eps)``."""
    b = np.asarray(b, dtype=float)
    conv = np.convolve(b, [eps, 1.0, eps], mode="same")
    s_max = (len(b) - 1) // 2
    if t_max < 0:
        return 0.0
    t = np.arange(-t_max, t_max + 1)
    return float(np.max(np.abs(conv[s_max + t] - (t == 0))))


# random-field codes ----------------------------------------------------------


class FieldCode:
    """Sliding code on ``Z^d``: the output at site e reads the sites ``e + offsets``."""

    def __init__(self, offsets, fn, out_dim=1, name="field-code"):
        self.offsets = np.asarray(offsets, dtype=int)
        self.fn = fn
        self.out_dim = int(out_dim)
        self.name = name

    @property
    def d(self):
        return self.offsets.shape[1]

    def apply(self, field):
        """Outputs at every site whose whole neighbourhood lies inside ``field``."""
        F = np.asarray(field, dtype=float)
        if F.ndim != self.d:
            raise ValidationError(f"field must be {self.d}-dimensional")
        lo = self.offsets.min(axis=0)
        hi = self.offsets.max(axis=0)
        shape = np.array(F.shape) - (hi - lo)
        if np.any(shape < 1):
            raise ValidationError("field is smaller than the code neighbourhood")
        grids = np.indices(tuple(shape)).reshape(self.d, -1).T - lo
        vals = np.stack([F[tuple((grids + o).T)] for o in self.offsets], axis=1)
        out = np.asarray(self.fn(vals[:, :, None]), dtype=float)[:, 0]
        return out.reshape(tuple(shape))


def field_code(potential, sites):
    """``S_e(x) = sum_{g in F} (d_g f)((x_{h-g})_{h in F})`` for a convex f on ``R^F``."""
    F = np.asarray(sites, dtype=int)
    if F.ndim != 2 or len(F) != potential.n:
        raise ValidationError("sites must be an (n, d) array matching the potential order")
    if len({tuple(s) for s in F.tolist()}) != len(F):
        raise ValidationError("sites must be distinct")
    if potential.is_convex() is False:
        raise ValidationError(f"{potential.form} potential is not convex")
    diffs = sorted({tuple(np.subtract(h, g)) for h in F.tolist() for g in F.tolist()})
    offsets = np.array(diffs, dtype=int)
    pos = {tuple(o): i for i, o in enumerate(diffs)}
    gather = [[pos[tuple(np.subtract(h, g))] for h in F.tolist()] for g in F.tolist()]

    def fn(V):
        out = np.zeros((len(V), potential.m))
        for gi, cols in enumerate(gather):
            out += potential.grad(V[:, cols, :])[:, gi, :]
        return out

    return FieldCode(offsets, fn, potential.m, name=f"field:{potential.form}")
