"""Cross curvature and the convex-stability checks built on it."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InversionError, SingularityError, ValidationError
from . import fd
from .transforms import c_supergradient_set, h_c, is_c_concave

FD_SINGULAR = 1e-6


def cross_curvature(cost, x, y, u=None, v=None, method="auto"):
    """Cross curvature ``sigma(x, y; u, v)``.

    For scalar points this is ``-c_xxyy + c_xxy c_xyy / c_xy`` (times
    ``u^2 v^2`` when directions are given). Vector points need ``u`` and
    ``v`` and are evaluated by finite differences.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    ya = np.atleast_1d(np.asarray(y, dtype=float))
    if xa.size == 1 and ya.size == 1:
        x, y = float(xa[0]), float(ya[0])
        cxy = cost.derivative("xy", x, y, method)
        # finite differences cannot resolve c_xy below about sqrt(machine eps)
        analytic = method != "fd" and cost._analytic("xy", x, y) is not None
        floor = 1e-14 if analytic else FD_SINGULAR
        if not np.isfinite(cxy) or abs(cxy) < floor:
            raise SingularityError(f"c_xy = {cxy} at ({x}, {y})")
        sigma = -cost.derivative("xxyy", x, y, method) + (
            cost.derivative("xxy", x, y, method) * cost.derivative("xyy", x, y, method) / cxy
        )
        if u is not None or v is not None:
            uu = 1.0 if u is None else float(np.ravel(u)[0])
            vv = 1.0 if v is None else float(np.ravel(v)[0])
            sigma *= uu * uu * vv * vv
        return float(sigma)
    if u is None or v is None:
        raise ValidationError("vector cross curvature needs directions u and v")
    if not cost.supports_vectors or not cost.differentiable:
        raise ValidationError(f"{cost.kind} cost has no vector derivatives")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m = xa.size
    func = lambda a, b: float(cost._eval_vec(a, b))
    scale = min(1.0, max(float(np.linalg.norm(xa - ya)), 1e-3))
    basis = np.eye(m)
    M = np.array([[fd.mixed_derivative(func, xa, ya, [basis[p]], [basis[q]], scale)
                   for q in range(m)] for p in range(m)])
    if abs(np.linalg.det(M)) < 1e-14:
        raise SingularityError("mixed derivative matrix (c_{i,j}) is singular")
    A = np.array([fd.mixed_derivative(func, xa, ya, [u, u], [basis[q]], scale) for q in range(m)])
    B = np.array([fd.mixed_derivative(func, xa, ya, [basis[p]], [v, v], scale) for p in range(m)])
    D = fd.mixed_derivative(func, xa, ya, [u, u], [v, v], scale)
    return float(-D + B @ np.linalg.solve(M, A))


@dataclass
class StabilityReport:
    """Outcome of :func:`convex_stability_check`.

    ``verdict`` is ``"unstable"`` when a violation was found,
    ``"inconclusive"`` when none was found although the sampled cross
    curvature is negative somewhere, and ``"stable"`` otherwise.
    """

    cost: dict
    n: int
    trials: int
    violations: list = field(default_factory=list)
    sigma_min: float = None
    verdict: str = "stable"

    def as_dict(self):
        return {
            "cost": self.cost,
            "n": self.n,
            "trials": self.trials,
            "violations": self.violations,
            "sigma_min": self.sigma_min,
            "verdict": self.verdict,
        }


def _candidates(cost, xs, ytuple):
    """First-order supergradient of h_c at every scalar grid point (empty if unavailable)."""
    if not cost.invertible:
        return np.empty(0)
    target = np.mean(cost.c_x(xs[:, None], ytuple[None, :]), axis=1)
    try:
        cand = cost.eta(xs, target)
    except InversionError:
        return np.empty(0)
    if cost.e2 is not None:
        lo, hi = cost.e2
        cand = cand[(cand > lo) & (cand < hi)]
    return cand


def condition_ii_gap(cost, x, z, ys, points=41):
    """Most negative second difference of ``u -> c(x, eta_x(u)) - c(z, eta_x(u))``.

    The map is sampled on a uniform u-grid spanning ``c_x(x, ys)``; the
    return value is normalized by the sampled magnitude so that zero
    means convex to rounding.
    """
    us = cost.c_x(x, np.asarray(ys, dtype=float))
    grid = np.linspace(np.min(us), np.max(us), points)
    etas = cost.eta(np.full_like(grid, x), grid)
    g = cost(x, etas) - cost(z, etas)
    d2 = g[:-2] - 2.0 * g[1:-1] + g[2:]
    return float(np.min(d2) / (1.0 + np.max(np.abs(g))))


def sigma_floor(cost, xs, ys, probes=15):
    """Minimum cross curvature over a probe subgrid of ``xs x ys``."""
    xi = np.unique(np.linspace(0, len(xs) - 1, min(probes, len(xs))).astype(int))
    yi = np.unique(np.linspace(0, len(ys) - 1, min(probes, len(ys))).astype(int))
    return min(cross_curvature(cost, xs[i], ys[j]) for i in xi for j in yi)


def convex_stability_check(cost, xs, ys, n=2, trials=200, seed=0, tol=1e-9):
    """Search for violations of convex stability of index ``n`` on grids.

    Each trial draws ``n`` points from ``ys``, forms ``h_c`` on ``xs`` and
    tests its c-concavity against ``ys`` enlarged by the first-order
    supergradient candidates. Scalar differentiable costs also get the
    midpoint-convexity test of the ``u -> c(x, eta_x(u)) - c(z, eta_x(u))``
    map for a random pair (x, z).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or ys.ndim != 1:
        raise ValidationError("convex_stability_check works on scalar grids")
    rng = np.random.default_rng(seed)
    report = StabilityReport(cost.describe(), int(n), int(trials))
    scalar_diff = cost.differentiable and cost.invertible
    for t in range(trials):
        ytuple = rng.choice(ys, size=n, replace=True)
        h = h_c(cost, xs, ytuple)
        aug = np.concatenate([ys, _candidates(cost, xs, ytuple)])
        res = is_c_concave(h, cost, xs, aug, tol)
        if not res.ok:
            report.violations.append({
                "trial": t,
                "check": "c_concavity",
                "ys": ytuple.tolist(),
                "x": float(xs[res.witness]),
                "gap": res.max_gap,
            })
        if scalar_diff and len(xs) > 1:
            i, j = rng.choice(len(xs), size=2, replace=False)
            gap = condition_ii_gap(cost, xs[i], xs[j], ys)
            if gap < -tol:
                report.violations.append({
                    "trial": t,
                    "check": "condition_ii",
                    "x": float(xs[i]),
                    "z": float(xs[j]),
                    "gap": gap,
                })
    if scalar_diff:
        report.sigma_min = sigma_floor(cost, xs, ys)
    if report.violations:
        report.verdict = "unstable"
    elif report.sigma_min is not None and report.sigma_min < 0:
        report.verdict = "inconclusive"
    return report


@dataclass
class CombinationReport:
    lambdas: list
    results: list

    @property
    def ok(self):
        return all(r["ok"] for r in self.results)


def concave_combination_check(f, g, cost, xs, ys, lambdas=(0.0, 0.25, 0.5, 0.75, 1.0), tol=1e-9):
    """Test c-concavity of ``(1 - lam) f + lam g`` for c-concave grid functions f, g.

    The y-grid is enlarged, per lambda, by the points
    ``eta_x((1 - lam) c_x(x, y_f) + lam c_x(x, y_g))`` with ``y_f``, ``y_g``
    supergradients of f and g at x.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    for name, fun in (("f", f), ("g", g)):
        if not is_c_concave(fun, cost, xs, ys, tol).ok:
            raise ValidationError(f"{name} is not c-concave on the given grids")
    sup_f = [ys[c_supergradient_set(f, i, cost, xs, ys, tol)[0]] for i in range(len(xs))]
    sup_g = [ys[c_supergradient_set(g, i, cost, xs, ys, tol)[0]] for i in range(len(xs))]
    results = []
    for lam in lambdas:
        mix = (1.0 - lam) * f + lam * g
        extra = []
        if cost.invertible:
            for x, yf, yg in zip(xs, sup_f, sup_g):
                u = (1.0 - lam) * cost.c_x(x, yf) + lam * cost.c_x(x, yg)
                try:
                    cand = cost.eta(x, u)
                except InversionError:
                    continue
                try:
                    cost.check_domain(x, cand)
                except ValueError:
                    continue
                extra.append(cand)
        aug = ys if not extra else np.concatenate([ys, np.asarray(extra).reshape(len(extra), *ys.shape[1:])])
        res = is_c_concave(mix, cost, xs, aug, tol)
        results.append({
            "lambda": float(lam),
            "ok": res.ok,
            "max_gap": res.max_gap,
            "witness": res.witness,
        })
    return CombinationReport([float(l) for l in lambdas], results)


def mean_potential_hessian(d2A, p, x, y):
    """Hessian of ``x -> c_n(x, y) - A(mean x)`` for ``c = (x - y)^p / p`` with x > y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    return np.diag((p - 1) * (x - y) ** (p - 2) / n) - d2A(x.mean()) / n**2 * np.ones((n, n))
