"""Command-line experiment runner.

Usage: ``statcoupling run CONFIG [--out report.json] [--csv DIR] [--seed N] [--jobs K]``.
Exit status is 0 on success, 2 for invalid input and 3 when a numeric
check fails.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
import yaml

from . import __version__
from .ctools import (
    average_supergradient,
    c_transform,
    c_transform_y,
    convex_stability_check,
    cross_curvature,
    first_order_residual,
    is_c_concave,
    make_cost,
)
from .equivariant import (
    MeanBased,
    Quadratic,
    SumOfUnivariate,
    ar_inverse_coefficients,
    ar_roots,
    build_c_code,
    build_code,
    convolution_residual,
    coupling_cost_exact,
    coupling_cost_mc,
    field_code,
)
from .errors import (
    CostDomainError,
    InversionError,
    NotCConcaveError,
    NumericCheckFailed,
    SingularityError,
    ValidationError,
)
from .glue import FiniteJoint, glue_finite
from .model import Pushforward, Source
from .rhobar import (
    FieldPushforward,
    FolnerBox,
    box_sites,
    field_coupling_cost_exact,
    folner_ratio,
    make_field,
    rho_field,
    rho_n,
    rho_sequence,
)

log = logging.getLogger("statcoupling")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
TASK_KINDS = ("rho_sequence", "couple", "ctransform", "curvature", "stability", "field", "ar_inverse", "glue")
DEFAULT_TOLERANCES = {"sandwich": 1e-8, "superadditivity": 1e-8, "bounds": 1e-9, "concavity": 1e-9}


class TaskError(Exception):
    def __init__(self, task, exc):
        self.task = task
        self.exc = exc
        super().__init__(f"task {task!r}: {exc}")


# config ----------------------------------------------------------------------


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ValidationError(f"config is not valid YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a mapping")
    return cfg, hashlib.sha256(text.encode("utf-8")).hexdigest()


def make_source(spec):
    spec = dict(spec)
    kind = spec.pop("kind", "iid")
    try:
        if kind == "iid":
            return Source.iid(spec["symbols"], spec["pmf"])
        if kind == "markov":
            return Source.markov(spec["symbols"], spec["transition"], spec.get("initial"))
    except KeyError as exc:
        raise ValidationError(f"{kind} source is missing {exc}") from None
    raise ValidationError(f"unknown source kind {kind!r}")


def make_potential(spec):
    spec = dict(spec)
    form = spec.pop("form", None)
    try:
        if form == "quadratic":
            return Quadratic(spec["A"], n=spec.get("n"), m=spec.get("m", 1))
        if form == "cross_term":
            return Quadratic.cross_term(float(spec["eps"]))
        if form == "sum_of_univariate":
            return SumOfUnivariate(spec["pieces"], weight=spec.get("weight", 1.0))
        if form == "mean_based":
            return MeanBased(spec["A"], int(spec["n"]))
    except KeyError as exc:
        raise ValidationError(f"{form} potential is missing {exc}") from None
    raise ValidationError(f"unknown potential form {form!r}")


class Registry:
    """Named sources, fields, potentials and costs declared by a config."""

    SECTIONS = {"sources": make_source, "fields": make_field, "potentials": make_potential, "costs": make_cost}

    def __init__(self, cfg):
        self.items = {}
        for section, factory in self.SECTIONS.items():
            raw = cfg.get(section) or {}
            if not isinstance(raw, dict):
                raise ValidationError(f"{section} must be a mapping of names")
            built = {}
            for name, spec in raw.items():
                if not isinstance(spec, dict):
                    raise ValidationError(f"{section}.{name} must be a mapping")
                try:
                    built[name] = factory(spec)
                except ValidationError as exc:
                    raise ValidationError(f"{section}.{name}: {exc}") from None
            self.items[section] = built

    def get(self, section, name, task):
        try:
            return self.items[section][name]
        except KeyError:
            raise ValidationError(f"task {task!r} references unknown {section[:-1]} {name!r}") from None


def validate(cfg):
    tasks = cfg.get("tasks") or []
    if not isinstance(tasks, list):
        raise ValidationError("tasks must be a list")
    names = set()
    for i, t in enumerate(tasks):
        if not isinstance(t, dict):
            raise ValidationError(f"task #{i} must be a mapping")
        kind = t.get("kind")
        if kind not in TASK_KINDS:
            raise ValidationError(f"task #{i} has unknown kind {kind!r}")
        name = t.setdefault("name", f"{kind}-{i}")
        if name in names:
            raise ValidationError(f"duplicate task name {name!r}")
        names.add(name)
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(cfg.get("tolerances") or {})
    for k, v in tol.items():
        if not isinstance(v, (int, float)) or v <= 0:
            raise ValidationError(f"tolerance {k!r} must be positive")
    caps = cfg.get("caps") or {}
    cap = caps.get("enumeration")
    if cap is not None and (not isinstance(cap, (int, float)) or cap < 1):
        raise ValidationError("caps.enumeration must be a positive number")
    return tasks, tol, (None if cap is None else int(cap))


# tasks -----------------------------------------------------------------------


def _check(name, ok, lhs, rhs, tol):
    return {"name": name, "pass": bool(ok), "lhs": lhs, "rhs": rhs, "tol": tol}


def _code_for(reg, task, spec):
    potential = reg.get("potentials", spec["potential"], task)
    mode = spec.get("mode", "convex")
    if mode == "convex":
        return build_code(potential)
    if mode == "c":
        cost = reg.get("costs", spec["cost"], task)
        source = reg.get("sources", spec["source"], task) if "source" in spec else None
        return build_c_code(potential, cost, source=source)
    raise ValidationError(f"task {task!r}: unknown code mode {mode!r}")


def task_rho_sequence(t, reg, ctx):
    name = t["name"]
    p = reg.get("sources", t["p"], name)
    if "q" in t:
        q = reg.get("sources", t["q"], name)
    elif "pushforward" in t:
        spec = dict(t["pushforward"])
        q = Pushforward(reg.get("sources", spec["source"], name), _code_for(reg, name, spec))
    else:
        raise ValidationError(f"task {name!r} needs q or pushforward")
    cost = reg.get("costs", t["cost"], name)
    rep = rho_sequence(p, q, cost, int(t.get("n_max", 1)), cap=ctx["cap"])
    tol = ctx["tol"]
    checks = [
        _check("superadditivity", not rep.superadditivity_violations, len(rep.superadditivity_violations), 0, tol["superadditivity"]),
        _check("rho_n_le_upper", not rep.bound_violations, rep.rho_bar, rep.upper, tol["bounds"]),
        _check("lower_le_max", rep.lower <= rep.rho_bar + tol["bounds"], rep.lower, rep.rho_bar, tol["bounds"]),
    ]
    rows = [(n, "rho_n", v) for n, v in zip(rep.n_values, rep.rho_n)]
    return rep.as_dict(), checks, rows


def task_couple(t, reg, ctx):
    name = t["name"]
    source = reg.get("sources", t["source"], name)
    cost = reg.get("costs", t["cost"], name)
    code = _code_for(reg, name, {**t, "source": t["source"]})
    exact = coupling_cost_exact(source, code, cost, cap=ctx["cap"])
    tol = ctx["tol"]["sandwich"]
    push = Pushforward(source, code)
    ns = list(range(1, int(t.get("n_max", 1)) + 1))
    values = [rho_n(source, push, cost, n, cap=ctx["cap"])[0] for n in ns]
    results = {
        "coupling_cost_exact": exact,
        "n_values": ns,
        "rho_n": values,
        "gaps": [exact - v for v in values],
    }
    checks = [_check(f"sandwich_n{n}", v <= exact + tol, v, exact, tol) for n, v in zip(ns, values)]
    rows = [(n, "rho_n", v) for n, v in zip(ns, values)] + [(n, "gap", exact - v) for n, v in zip(ns, values)]
    samples = t.get("mc_samples")
    if samples:
        est, se = coupling_cost_mc(source, code, cost, int(samples), ctx["seed"], jobs=ctx["jobs"])
        results["monte_carlo"] = {"estimate": est, "stderr": se, "samples": int(samples)}
        checks.append(_check("mc_within_3se", abs(est - exact) <= 3 * se + 1e-15, abs(est - exact), 3 * se, 0.0))
    return results, checks, rows


def _grid(t, key):
    if key not in t:
        raise ValidationError(f"missing grid {key!r}")
    g = t[key]
    if isinstance(g, dict):
        return np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))
    return np.asarray(g, dtype=float)


def task_ctransform(t, reg, ctx):
    name = t["name"]
    cost = reg.get("costs", t["cost"], name)
    xs, ys = _grid(t, "xs"), _grid(t, "ys")
    f = np.asarray(t["f"], dtype=float)
    if f.shape != xs.shape[:1]:
        raise ValidationError(f"task {name!r}: f must have one value per x")
    tol = ctx["tol"]["concavity"]
    fc = c_transform(f, cost, xs, ys)
    fcc = c_transform_y(fc, cost, xs, ys)
    res = is_c_concave(f, cost, xs, ys, tol)
    results = {"f_c": fc.tolist(), "f_cc": fcc.tolist(), "c_concave": res.ok, "max_gap": res.max_gap, "witness": res.witness}
    if "supergradient" in t:
        sg = t["supergradient"]
        u0 = average_supergradient(cost, sg["x0"], sg["ys"])
        results["average_supergradient"] = {"u0": u0, "residual": first_order_residual(cost, sg["x0"], sg["ys"], u0)}
    checks = [_check("fcc_ge_f", bool(np.all(fcc >= f - tol)), float(np.min(fcc - f)), 0.0, tol)]
    return results, checks, []


def task_curvature(t, reg, ctx):
    name = t["name"]
    cost = reg.get("costs", t["cost"], name)
    pts = np.asarray(t["points"], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"task {name!r}: points must be [x, y] pairs")
    analytic = [cross_curvature(cost, x, y, method="auto") for x, y in pts]
    fdv = [cross_curvature(cost, x, y, method="fd") for x, y in pts]
    rtol = float(t.get("rtol", 1e-4))
    rel = [abs(a - b) / max(abs(a), 1.0) for a, b in zip(analytic, fdv)]
    results = {"points": pts.tolist(), "sigma": analytic, "sigma_fd": fdv, "sigma_min": min(analytic)}
    checks = [_check("fd_agreement", max(rel) <= rtol, max(rel), rtol, rtol)]
    return results, checks, [(i, "sigma", s) for i, s in enumerate(analytic)]


def task_stability(t, reg, ctx):
    name = t["name"]
    cost = reg.get("costs", t["cost"], name)
    rep = convex_stability_check(
        cost, _grid(t, "xs"), _grid(t, "ys"), n=int(t.get("n", 2)), trials=int(t.get("trials", 200)), seed=ctx["seed"]
    )
    checks = []
    if "expect" in t:
        checks.append(_check("verdict", rep.verdict == t["expect"], rep.verdict, t["expect"], 0.0))
    return rep.as_dict(), checks, []


def task_field(t, reg, ctx):
    name = t["name"]
    p = reg.get("fields", t["p"], name)
    cost = reg.get("costs", t["cost"], name)
    code = None
    if "q" in t:
        q = reg.get("fields", t["q"], name)
    elif "pushforward" in t:
        spec = t["pushforward"]
        code = field_code(reg.get("potentials", spec["potential"], name), spec["sites"])
        q = FieldPushforward(p, code)
    else:
        raise ValidationError(f"task {name!r} needs q or pushforward")
    boxes = t.get("boxes") or [[1] * p.d]
    values = [rho_field(p, q, cost, box_sites(shape), cap=ctx["cap"]) for shape in boxes]
    results = {"boxes": boxes, "rho_F": values}
    checks = []
    if code is not None:
        exact = field_coupling_cost_exact(p, code, cost, cap=ctx["cap"])
        tol = ctx["tol"]["sandwich"]
        results["coupling_cost_exact"] = exact
        checks += [_check(f"sandwich_box{i}", v <= exact + tol, v, exact, tol) for i, v in enumerate(values)]
    if "folner" in t:
        fo = t["folner"]
        shift = fo["shift"]
        ratios = [folner_ratio(FolnerBox(p.d, n), shift) for n in range(int(fo.get("n_max", 10)) + 1)]
        results["folner_ratios"] = ratios
        mono = all(b >= a for a, b in zip(ratios, ratios[1:]))
        checks.append(_check("folner_monotone", mono, ratios[-1], 1.0, 0.0))
    rows = [(int(np.prod(b)), "rho_F", v) for b, v in zip(boxes, values)]
    return results, checks, rows


def task_ar_inverse(t, reg, ctx):
    eps = float(t["eps"])
    s_max = int(t.get("s_max", 20))
    b = ar_inverse_coefficients(eps, s_max)
    results = {"s": list(range(-s_max, s_max + 1)), "b": b.tolist()}
    checks = []
    if eps != 0:
        zp, zm = ar_roots(eps)
        resid = convolution_residual(b, eps, s_max - 2)
        results.update({"z_plus": zp, "z_minus": zm, "residual": resid})
        checks += [
            _check("root_separation", abs(zp) < 1 < abs(zm), abs(zp), abs(zm), 0.0),
            _check("convolution_identity", resid <= 1e-8, resid, 0.0, 1e-8),
        ]
    return results, checks, [(s, "b", v) for s, v in zip(results["s"], results["b"])]


def _joint(spec, exact):
    mass = spec["mass"]
    arr = np.array([[Fraction(str(v)) for v in row] for row in mass], dtype=object) if exact else np.asarray(mass, float)
    axes = spec.get("axes") or [list(range(arr.shape[0])), list(range(arr.shape[1]))]
    return FiniteJoint(tuple(axes), arr)


def task_glue(t, reg, ctx):
    exact = bool(t.get("exact", False))
    p12, p23 = _joint(t["p12"], exact), _joint(t["p23"], exact)
    g = glue_finite(p12, p23)
    err12 = abs(g.marginal((0, 1)).mass - p12.mass).max()
    err23 = abs(g.marginal((1, 2)).mass - p23.mass).max()
    fmt = (lambda v: str(v)) if exact else float
    results = {
        "axes": [list(a) for a in g.axes],
        "mass": [[[fmt(v) for v in row] for row in plane] for plane in g.mass],
        "marginal_error_12": float(err12),
        "marginal_error_23": float(err23),
    }
    tol = 0.0 if exact else 1e-12
    checks = [
        _check("marginal_12", err12 <= tol, float(err12), 0.0, tol),
        _check("marginal_23", err23 <= tol, float(err23), 0.0, tol),
    ]
    return results, checks, []


HANDLERS = {
    "rho_sequence": task_rho_sequence,
    "couple": task_couple,
    "ctransform": task_ctransform,
    "curvature": task_curvature,
    "stability": task_stability,
    "field": task_field,
    "ar_inverse": task_ar_inverse,
    "glue": task_glue,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if np.isfinite(obj) else str(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def run_task(index, t, reg, base):
    name = t["name"]
    ctx = dict(base)
    ctx["seed"] = int(np.random.SeedSequence([base["seed"], index]).generate_state(1)[0])
    inputs = {k: v for k, v in t.items() if k not in ("name", "kind")}
    try:
        results, checks, rows = HANDLERS[t["kind"]](t, reg, ctx)
    except KeyError as exc:
        raise TaskError(name, ValidationError(f"missing field {exc}")) from None
    except Exception as exc:
        raise TaskError(name, exc) from None
    entry = {"name": name, "kind": t["kind"], "inputs": inputs, "results": results, "checks": checks}
    return _jsonable(entry), [(name, t["kind"], n, q, v) for n, q, v in rows]


def run(config_path, out_path=None, csv_dir=None, seed=None, jobs=1):
    """Execute a config; returns ``(exit_code, report)``."""
    start = time.perf_counter()
    cfg, digest = load_config(config_path)
    tasks, tol, cap = validate(cfg)
    reg = Registry(cfg)
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    base = {"seed": seed, "tol": tol, "cap": cap, "jobs": max(1, int(jobs))}
    work = list(enumerate(tasks))
    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_task, i, t, reg, base) for i, t in work]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [run_task(i, t, reg, base) for i, t in work]
    entries = [e for e, _ in outcomes]
    report = {
        "tasks": entries,
        "provenance": {
            "config_sha256": digest,
            "seed": seed,
            "version": __version__,
            "wall_clock_seconds": time.perf_counter() - start,
        },
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    if csv_dir:
        os.makedirs(csv_dir, exist_ok=True)
        with open(os.path.join(csv_dir, "results.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["task", "kind", "n", "quantity", "value"])
            for _, rows in outcomes:
                w.writerows(rows)
    failed = [(e["name"], c["name"]) for e in entries for c in e["checks"] if not c["pass"]]
    for task, check in failed:
        log.error("check failed: %s/%s", task, check)
    return (EXIT_NUMERIC if failed else EXIT_OK), report


NUMERIC_ERRORS = (NumericCheckFailed, NotCConcaveError, SingularityError, InversionError, ArithmeticError)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="statcoupling", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="write the JSON report here instead of stdout")
    p_run.add_argument("--csv", help="directory for flat CSV tables")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--jobs", type=int, default=1, help="run tasks in parallel")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        code, _ = run(args.config, args.out, args.csv, args.seed, args.jobs)
        return code
    except TaskError as err:
        log.error("%s", err)
        if isinstance(err.exc, NUMERIC_ERRORS):
            return EXIT_NUMERIC
        if isinstance(err.exc, (ValidationError, CostDomainError, ValueError)):
            return EXIT_INVALID
        raise
    except (ValidationError, CostDomainError) as err:
        log.error("%s", err)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
