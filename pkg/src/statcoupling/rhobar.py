"""Window-wise optimal transport between stationary sources and i.i.d. fields."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import enumeration_cap
from .errors import EnumerationTooLarge, ValidationError
from .model import Alphabet, WindowDistribution, merged
from .transport import independent_product_cost, solve_exact

SUPERADDITIVITY_TOL = 1e-8
BOUND_TOL = 1e-9


def rho_n(source_p, source_q, cost, n, cap=None, backend=None):
    """Optimal transport cost between the n-window marginals under ``c_n``.

    ``source_q`` may be any object with a ``window_marginal(n, cap)`` method
    (for instance a pushforward). Returns ``(value, plan)``.
    """
    n = int(n)
    if n < 1:
        raise ValidationError("n must be >= 1")
    mp = source_p.window_marginal(n, cap=cap)
    mq = source_q.window_marginal(n, cap=cap)
    return _solve_windows(mp, mq, cost, backend)


def _solve_windows(mp, mq, cost, backend=None):
    C = cost.window_matrix(mp.points, mq.points)
    plan = solve_exact(C, mp.mass, mq.mass, backend=backend)
    return plan.cost, plan


@dataclass
class RhoReport:
    n_values: list
    rho_n: list
    lower: float
    upper: float
    superadditivity_violations: list = field(default_factory=list)
    bound_violations: list = field(default_factory=list)
    truncated: bool = True

    @property
    def rho_bar(self):
        """Largest computed value; a lower estimate since the sup is over all n."""
        return max(self.rho_n)

    def as_dict(self):
        return {
            "n_values": list(self.n_values),
            "rho_n": list(self.rho_n),
            "lower": self.lower,
            "upper": self.upper,
            "rho_bar_lower_estimate": self.rho_bar,
            "truncated_at_n_max": self.truncated,
            "superadditivity_violations": self.superadditivity_violations,
            "bound_violations": self.bound_violations,
        }


def superadditivity_violations(values, tol=SUPERADDITIVITY_TOL):
    """Pairs (m, n) with ``(m+n) r_{m+n} < m r_m + n r_n - tol``; ``values[k-1] = r_k``."""
    out = []
    N = len(values)
    for m in range(1, N + 1):
        for n in range(m, N + 1 - m):
            lhs = (m + n) * values[m + n - 1]
            rhs = m * values[m - 1] + n * values[n - 1]
            if lhs < rhs - tol:
                out.append({"m": m, "n": n, "lhs": lhs, "rhs": rhs})
    return out


def rho_sequence(source_p, source_q, cost, n_max, cap=None, jobs=1, backend=None):
    """``rho_n`` for ``n = 1..n_max`` with the one-window bounds and a Fekete audit."""
    n_max = int(n_max)
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    ns = list(range(1, n_max + 1))
    task = lambda n: rho_n(source_p, source_q, cost, n, cap=cap, backend=backend)[0]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(task, ns))
    else:
        values = [task(n) for n in ns]
    m1p = source_p.window_marginal(1, cap=cap)
    m1q = source_q.window_marginal(1, cap=cap)
    C1 = cost.window_matrix(m1p.points, m1q.points)
    upper = independent_product_cost(C1, m1p.mass, m1q.mass)
    report = RhoReport(ns, values, values[0], upper)
    report.superadditivity_violations = superadditivity_violations(values)
    report.bound_violations = [
        {"n": n, "rho_n": v, "upper": upper} for n, v in zip(ns, values) if v > upper + BOUND_TOL
    ]
    return report


# random fields ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IIDField:
    """An i.i.d. random field on ``Z^d`` with one-site law ``pmf`` on ``symbols``."""

    symbols: object
    pmf: object
    d: int = 2
    kind: str = "iid"

    def __post_init__(self):
        if self.kind != "iid":
            raise ValidationError(f"unsupported field kind {self.kind!r}")
        alphabet = self.symbols if isinstance(self.symbols, Alphabet) else Alphabet(self.symbols)
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.shape != (alphabet.size,) or np.any(pmf < 0) or abs(pmf.sum() - 1) > 1e-12:
            raise ValidationError("field pmf must be a probability vector over the symbols")
        if int(self.d) < 1:
            raise ValidationError("lattice dimension must be >= 1")
        object.__setattr__(self, "symbols", alphabet)
        object.__setattr__(self, "pmf", pmf)

    @property
    def alphabet(self):
        return self.symbols

    def box_index_probs(self, count, cap=None):
        K = self.alphabet.size
        limit = enumeration_cap(cap)
        if K**count > limit:
            raise EnumerationTooLarge(K**count, limit, "field box enumeration")
        idx = np.indices((K,) * count).reshape(count, -1).T
        prob = np.prod(self.pmf[idx], axis=1)
        keep = prob > 0
        return idx[keep], prob[keep]

    def box_marginal(self, sites, cap=None):
        sites = _sites(sites, self.d)
        idx, prob = self.box_index_probs(len(sites), cap)
        return WindowDistribution(self.alphabet.symbols[idx], prob / prob.sum())


def make_field(spec):
    spec = dict(spec)
    kind = spec.pop("kind", "iid")
    if kind != "iid":
        raise ValidationError(f"unsupported field kind {kind!r}")
    return IIDField(spec["symbols"], spec["pmf"], int(spec.get("d", 2)))


@dataclass(frozen=True)
class FolnerBox:
    """The box ``{-n, ..., n}^d``."""

    d: int
    n: int

    def __post_init__(self):
        if self.d < 1 or self.n < 0:
            raise ValidationError("need d >= 1 and n >= 0")

    @property
    def sites(self):
        return box_sites((2 * self.n + 1,) * self.d, origin=(-self.n,) * self.d)

    def __len__(self):
        return (2 * self.n + 1) ** self.d


def box_sites(shape, origin=None):
    """Integer sites of a rectangular box, in C order."""
    shape = tuple(int(s) for s in shape)
    origin = (0,) * len(shape) if origin is None else tuple(int(o) for o in origin)
    return np.indices(shape).reshape(len(shape), -1).T + np.array(origin)


def _sites(box, d):
    S = box.sites if isinstance(box, FolnerBox) else np.asarray(box, dtype=int)
    if S.ndim != 2 or S.shape[1] != d:
        raise ValidationError(f"sites must be an (N, {d}) integer array")
    if len({tuple(s) for s in S.tolist()}) != len(S):
        raise ValidationError("sites must be distinct")
    return S


def folner_ratio(box, shift):
    """``|F ∩ (h + F)| / |F|`` for ``F = {-n..n}^d``, exact rational as float."""
    h = np.atleast_1d(np.asarray(shift, dtype=int))
    if h.shape != (box.d,):
        raise ValidationError(f"shift must have {box.d} components")
    side = 2 * box.n + 1
    overlap = 1
    for hi in h.tolist():
        overlap *= max(0, side - abs(hi))
    return float(Fraction(overlap, side**box.d))


class FieldPushforward:
    """Law of ``S(X)`` for an i.i.d. field X and a field code S."""

    def __init__(self, field, code):
        if code.d != field.d:
            raise ValidationError("code and field dimensions differ")
        self.field = field
        self.code = code
        self.d = field.d

    def box_marginal(self, sites, cap=None):
        sites = _sites(sites, self.d)
        need = sorted({tuple(int(v) for v in np.add(s, o)) for s in sites.tolist() for o in self.code.offsets.tolist()})
        pos = {s: i for i, s in enumerate(need)}
        idx, prob = self.field.box_index_probs(len(need), cap)
        vals = self.field.alphabet.symbols[idx]
        outs = []
        for s in sites.tolist():
            cols = [pos[tuple(int(v) for v in np.add(s, o))] for o in self.code.offsets.tolist()]
            outs.append(np.asarray(self.code.fn(vals[:, cols, :]), dtype=float))
        return merged(np.stack(outs, axis=1), prob / prob.sum())


def rho_field(field_p, field_q, cost, box, cap=None, backend=None):
    """Optimal transport cost between box marginals under the site-averaged cost."""
    for f in (field_p, field_q):
        if not isinstance(f, (IIDField, FieldPushforward)):
            raise ValidationError("unsupported field kind")
    if field_p.d != field_q.d:
        raise ValidationError("fields live on lattices of different dimension")
    sites = _sites(box, field_p.d)
    mp = field_p.box_marginal(sites, cap)
    mq = field_q.box_marginal(sites, cap)
    value, _ = _solve_windows(mp, mq, cost, backend)
    return value


def field_coupling_cost_exact(field, code, cost, cap=None):
    """``E c(X_e, S_e(X))`` for an i.i.d. field by enumerating the code neighbourhood."""
    k = len(code.offsets)
    idx, prob = field.box_index_probs(k, cap)
    vals = field.alphabet.symbols[idx]
    out = np.asarray(code.fn(vals), dtype=float)
    center = int(np.flatnonzero(np.all(code.offsets == 0, axis=1))[0])
    x = vals[:, center, :]
    if x.shape[1] == 1 and out.shape[1] == 1:
        c = cost(x[:, 0], out[:, 0])
    else:
        cost.check_domain(x, out)
        c = cost._eval_vec(x, out)
    return float(np.dot(prob / prob.sum(), c))
