"""Stationary finite-alphabet sources and their exact window marginals."""

import bisect
from dataclasses import dataclass, field

import numpy as np

from .config import MERGE_TOL, enumeration_cap
from .errors import EnumerationTooLarge, ValidationError

PMF_TOL = 1e-12
STATIONARITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Alphabet:
    """Finite ordered set of distinct points in R^m; the index is the symbol id."""

    symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] == 0:
            raise ValidationError("alphabet must be a nonempty list of points")
        if not np.all(np.isfinite(s)):
            raise ValidationError("alphabet symbols must be finite")
        if len(np.unique(s, axis=0)) != len(s):
            raise ValidationError("alphabet symbols must be pairwise distinct")
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    @property
    def size(self):
        return self.symbols.shape[0]

    @property
    def dim(self):
        return self.symbols.shape[1]

    def __len__(self):
        return self.size

    def index_of(self, point):
        p = np.atleast_1d(np.asarray(point, dtype=float))
        hits = np.flatnonzero(np.all(self.symbols == p, axis=1))
        if hits.size == 0:
            raise ValidationError(f"{point!r} is not a symbol of this alphabet")
        return int(hits[0])

    def indices_of(self, path):
        """Map a path of symbols (shape (L,) or (L, m)) to symbol ids."""
        pts = np.asarray(path, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        eq = np.all(pts[:, None, :] == self.symbols[None, :, :], axis=2)
        if not np.all(eq.any(axis=1)):
            raise ValidationError("path contains points outside the alphabet")
        return eq.argmax(axis=1)

    def to_list(self):
        if self.dim == 1:
            return self.symbols[:, 0].tolist()
        return self.symbols.tolist()


def _as_alphabet(symbols):
    return symbols if isinstance(symbols, Alphabet) else Alphabet(symbols)


def _check_pmf(p, name="pmf"):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValidationError(f"{name} must be a nonnegative finite vector")
    if abs(p.sum() - 1.0) > PMF_TOL:
        raise ValidationError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def _check_stochastic(P):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ValidationError("transition matrix must be square")
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise ValidationError("transition matrix has negative or non-finite entries")
    bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > PMF_TOL)
    if bad.size:
        raise ValidationError(f"row {int(bad[0])} of the transition matrix does not sum to 1")
    return P


def _strongly_connected(P):
    K = P.shape[0]
    adj = P > 0
    for graph in (adj, adj.T):
        seen = np.zeros(K, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(graph[i] & ~seen):
                seen[j] = True
                stack.append(int(j))
        if not seen.all():
            return False
    return True


def stationary_distribution(transition):
    """Unique stationary vector of an irreducible row-stochastic matrix."""
    P = _check_stochastic(transition)
    if not _strongly_connected(P):
        raise ValidationError("no unique stationary distribution: chain is reducible")
    K = P.shape[0]
    A = np.vstack([P.T - np.eye(K), np.ones((1, K))])
    rhs = np.zeros(K + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    # one power step polishes the least-squares residual
    pi = pi @ P
    pi /= pi.sum()
    if np.max(np.abs(pi @ P - pi)) > STATIONARITY_TOL:
        raise ArithmeticError("stationary distribution residual above 1e-10")
    return pi


@dataclass(frozen=True, eq=False)
class Source:
    """A stationary Markov source; i.i.d. sources have identical rows.

    Use :meth:`iid` or :meth:`markov` rather than the raw constructor.
    """

    alphabet: Alphabet
    transition: np.ndarray
    initial: np.ndarray
    kind: str = "markov"

    def __post_init__(self):
        alphabet = _as_alphabet(self.alphabet)
        P = _check_stochastic(self.transition)
        pi = _check_pmf(self.initial, "initial")
        if P.shape[0] != alphabet.size or pi.size != alphabet.size:
            raise ValidationError("transition/initial size does not match the alphabet")
        if np.max(np.abs(pi @ P - pi)) > STATIONARITY_TOL:
            raise ValidationError("initial distribution is not stationary for the transition")
        if self.kind not in ("iid", "markov"):
            raise ValidationError(f"unknown source kind {self.kind!r}")
        for arr in (P, pi):
            arr.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial", pi)

    @classmethod
    def iid(cls, symbols, pmf):
        pmf = _check_pmf(pmf)
        P = np.tile(pmf, (pmf.size, 1))
        return cls(_as_alphabet(symbols), P, pmf, kind="iid")

    @classmethod
    def markov(cls, symbols, transition, initial=None):
        if initial is None:
            initial = stationary_distribution(transition)
        return cls(_as_alphabet(symbols), transition, initial, kind="markov")

    @property
    def pmf(self):
        """One-window marginal (the stationary distribution)."""
        return self.initial

    def window_marginal(self, n, cap=None):
        return window_marginal(self, n, cap=cap)


@dataclass(frozen=True, eq=False)
class WindowDistribution:
    """Probability mass function on n-windows of points in R^m.

    ``points`` has shape (N, n, m), ``mass`` shape (N,).
    """

    points: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 2:
            pts = pts[:, :, None]
        mass = np.asarray(self.mass, dtype=float)
        if pts.ndim != 3 or mass.shape != (pts.shape[0],):
            raise ValidationError("points must be (N, n, m) with one mass per point")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > PMF_TOL:
            raise ValidationError("window masses must be a probability vector")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mass", mass)

    @property
    def window_length(self):
        return self.points.shape[1]

    @property
    def dim(self):
        return self.points.shape[2]

    @property
    def size(self):
        return self.points.shape[0]

    def marginal(self, start, stop):
        """Distribution of the sub-window ``[start, stop)``."""
        return merged(self.points[:, start:stop, :], self.mass)

    def as_dict(self, decimals=12):
        """``{window tuple: mass}`` with scalar symbols unwrapped."""
        out = {}
        for pt, m in zip(self.points, self.mass):
            key = tuple(
                round(float(v[0]), decimals) if len(v) == 1 else tuple(np.round(v, decimals))
                for v in pt
            )
            out[key] = out.get(key, 0.0) + float(m)
        return out

    def same_as(self, other, atol=1e-12):
        """Equality as measures, up to ``atol`` in masses and atom locations."""
        if self.points.shape[1:] != other.points.shape[1:]:
            return False
        a = merged(self.points, self.mass)
        b = merged(other.points, other.mass)
        if a.size != b.size:
            return False
        return bool(
            np.allclose(a.points, b.points, atol=MERGE_TOL, rtol=0)
            and np.allclose(a.mass, b.mass, atol=atol, rtol=0)
        )


@dataclass(frozen=True, eq=False)
class JointWindowDistribution:
    """A coupling of two window distributions; ``mass[i, j]`` pairs atom i with atom j."""

    left: WindowDistribution
    right: WindowDistribution
    mass: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.mass, dtype=float)
        if M.shape != (self.left.size, self.right.size):
            raise ValidationError("joint mass shape does not match the marginals")
        if np.any(M < -PMF_TOL):
            raise ValidationError("joint mass has negative entries")
        object.__setattr__(self, "mass", M)

    def marginal_error(self):
        return max(
            float(np.max(np.abs(self.mass.sum(axis=1) - self.left.mass))),
            float(np.max(np.abs(self.mass.sum(axis=0) - self.right.mass))),
        )


def _snap_columns(flat, tol):
    """Replace values within ``tol`` of each other (per column) by one representative."""
    out = flat.copy()
    for c in range(flat.shape[1]):
        col = flat[:, c]
        order = np.argsort(col, kind="stable")
        vals = col[order]
        breaks = np.concatenate([[True], np.diff(vals) > tol])
        group = np.cumsum(breaks) - 1
        reps = vals[breaks]
        out[order, c] = reps[group]
    return out


def merged(points, mass, tol=MERGE_TOL):
    """Aggregate equal atoms (within ``tol`` per coordinate) into a WindowDistribution."""
    points = np.asarray(points, dtype=float)
    N, n, m = points.shape
    keep = mass > 0
    points, mass = points[keep], np.asarray(mass)[keep]
    flat = _snap_columns(points.reshape(len(points), n * m), tol)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    total = np.zeros(len(uniq))
    np.add.at(total, inverse.ravel(), mass)
    total /= total.sum()
    return WindowDistribution(uniq.reshape(len(uniq), n, m), total)


def _check_cap(K, length, cap, what):
    cap = enumeration_cap(cap)
    needed = K**length
    if needed > cap:
        raise EnumerationTooLarge(needed, cap, what)


def window_index_probs(source, n, cap=None):
    """Symbol-id windows of length ``n`` with positive probability, and their masses."""
    if n < 1:
        raise ValidationError("window length must be >= 1")
    K = source.alphabet.size
    _check_cap(K, n, cap, "window enumeration")
    P, pi = source.transition, source.initial
    idx = np.flatnonzero(pi > 0)[:, None]
    prob = pi[idx[:, 0]]
    for _ in range(n - 1):
        step = prob[:, None] * P[idx[:, -1], :]
        rows, nxt = np.nonzero(step > 0)
        idx = np.hstack([idx[rows], nxt[:, None]])
        prob = step[rows, nxt]
    return idx, prob


def window_marginal(source, n, cap=None):
    """Exact law of ``(X_0, ..., X_{n-1})``."""
    idx, prob = window_index_probs(source, n, cap)
    return WindowDistribution(source.alphabet.symbols[idx], prob / prob.sum())


def pushforward_window_marginal(source, code, n, cap=None):
    """Exact law of ``(S_0(X), ..., S_{n-1}(X))`` for a sliding block code ``S``."""
    r = code.radius
    K = source.alphabet.size
    _check_cap(K, n + 2 * r, cap, "pushforward enumeration")
    idx, prob = window_index_probs(source, n + 2 * r, cap)
    table = code.table(source.alphabet)
    width = 2 * r + 1
    flat_table = table.reshape(K**width, -1)
    outs = []
    for t in range(n):
        w = idx[:, t : t + width]
        outs.append(flat_table[np.ravel_multi_index(tuple(w.T), (K,) * width)])
    pts = np.stack(outs, axis=1)
    return merged(pts, prob)


@dataclass(frozen=True, eq=False)
class Pushforward:
    """The stationary law of ``S(X)`` for a source X and an equivariant code S."""

    source: Source
    code: object = field(repr=False)

    def window_marginal(self, n, cap=None):
        return pushforward_window_marginal(self.source, self.code, n, cap=cap)


def block_source(source, m):
    """The R^m-valued process ``Y_k = (X_k, ..., X_{k+m-1})`` as a Markov source.

    States are the positive-probability m-windows of ``source``; the chain
    shifts the window by one step.
    """
    if source.alphabet.dim != 1:
        raise ValidationError("block_source expects a scalar alphabet")
    idx, prob = window_index_probs(source, m)
    lookup = {tuple(row): s for s, row in enumerate(idx.tolist())}
    S = len(idx)
    T = np.zeros((S, S))
    P = source.transition
    for s, row in enumerate(idx.tolist()):
        for nxt in np.flatnonzero(P[row[-1]] > 0):
            t = lookup.get(tuple(row[1:]) + (int(nxt),))
            if t is not None:
                T[s, t] += P[row[-1], nxt]
    symbols = source.alphabet.symbols[idx, 0]
    return Source(Alphabet(symbols), T, prob / prob.sum(), kind="markov")


def _rng(seed):
    return np.random.default_rng(seed)


def sample_indices(source, length, seed, start=None):
    """Symbol ids of a stationary sample path (or one started at ``start``)."""
    if length < 1:
        raise ValidationError("length must be >= 1")
    rng = _rng(seed)
    K = source.alphabet.size
    if source.kind == "iid" and start is None:
        return rng.choice(K, size=length, p=source.initial)
    cum = np.cumsum(source.transition, axis=1).tolist()
    out = np.empty(length, dtype=np.int64)
    if start is None:
        state = int(rng.choice(K, p=source.initial))
    else:
        state = int(start)
    draws = rng.random(length).tolist()
    out[0] = state
    for t in range(1, length):
        row = cum[state]
        state = min(bisect.bisect_right(row, draws[t]), K - 1)
        out[t] = state
    return out


def sample_path(source, length, seed, start=None):
    """A sample path as points: shape (length,) for scalar alphabets, else (length, m)."""
    idx = sample_indices(source, length, seed, start=start)
    pts = source.alphabet.symbols[idx]
    return pts[:, 0] if source.alphabet.dim == 1 else pts


def sample_windows(source, count, length, rng):
    """``count`` independent stationary windows of symbol ids, shape (count, length)."""
    K = source.alphabet.size
    out = np.empty((count, length), dtype=np.int64)
    out[:, 0] = rng.choice(K, size=count, p=source.initial)
    cum = np.cumsum(source.transition, axis=1)
    cum[:, -1] = 1.0
    for t in range(1, length):
        u = rng.random(count)
        out[:, t] = (cum[out[:, t - 1]] < u[:, None]).sum(axis=1)
    return out
