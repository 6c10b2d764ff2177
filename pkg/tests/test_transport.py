import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import transport_linprog, transport_vertices
from statcoupling import ValidationError
from statcoupling.transport import (
    available_backends,
    disjointify,
    independent_product_cost,
    solve_exact,
)
from statcoupling import _simplex_py

BACKENDS = available_backends()


def random_problem(seed, k, l, zeros=False):
    rng = np.random.default_rng(seed)
    C = rng.random((k, l)).round(2)
    a = rng.random(k) + (0.0 if zeros else 0.1)
    b = rng.random(l) + (0.0 if zeros else 0.1)
    if zeros:
        a[rng.random(k) < 0.3] = 0
        b[rng.random(l) < 0.3] = 0
        a[0] += 0.1
        b[-1] += 0.1
    return C, a / a.sum(), b / b.sum()


def test_backends_listed():
    assert "python" in BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
def test_hamming_bernoulli(backend):
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    plan = solve_exact(C, [0.7, 0.3], [0.5, 0.5], backend=backend)
    assert plan.cost == pytest.approx(0.2, abs=1e-15)
    assert plan.certified()


@pytest.mark.parametrize("backend", BACKENDS)
def test_forced_plan(backend):
    plan = solve_exact([[2.0]], [1.0], [1.0], backend=backend)
    assert plan.cost == 2.0


@pytest.mark.parametrize("backend", BACKENDS)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 4), l=st.integers(1, 3))
def test_matches_vertex_enumeration(backend, seed, k, l):
    C, a, b = random_problem(seed, k, l)
    plan = solve_exact(C, a, b, backend=backend)
    assert plan.cost == pytest.approx(transport_vertices(C, a, b), abs=1e-10)


@pytest.mark.parametrize("backend", BACKENDS)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 12), l=st.integers(1, 12), zeros=st.booleans())
def test_matches_linprog_and_marginals(backend, seed, k, l, zeros):
    C, a, b = random_problem(seed, k, l, zeros)
    plan = solve_exact(C, a, b, backend=backend)
    assert plan.cost == pytest.approx(transport_linprog(C, a, b), abs=1e-9)
    assert np.allclose(plan.mass.sum(axis=1), a, atol=1e-12)
    assert np.allclose(plan.mass.sum(axis=0), b, atol=1e-12)
    assert np.all(plan.mass >= -1e-15)
    # dual feasibility and zero gap certify optimality
    slack = C - plan.row_potential[:, None] - plan.col_potential[None, :]
    assert slack.min() >= -1e-9
    assert abs(plan.duality_gap) <= 1e-9


@given(seed=st.integers(0, 10_000), k=st.integers(1, 15), l=st.integers(1, 15))
def test_backends_agree_exactly(seed, k, l):
    C, a, b = random_problem(seed, k, l)
    plans = [solve_exact(C, a, b, backend=be) for be in BACKENDS]
    for p in plans[1:]:
        assert np.array_equal(p.mass, plans[0].mass)
        assert p.iterations == plans[0].iterations


def test_degenerate_problem_terminates():
    # identical uniform marginals with many ties: heavy degeneracy
    n = 30
    C = np.abs(np.subtract.outer(np.arange(n), np.arange(n)) % 3).astype(float)
    a = np.full(n, 1 / n)
    for be in BACKENDS:
        plan = solve_exact(C, a, a, backend=be)
        assert plan.cost == pytest.approx(transport_linprog(C, a, a), abs=1e-12)


def test_northwest_corner_is_feasible():
    rows, cols, flows = _simplex_py.northwest_corner(np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]))
    assert len(rows) == 4
    assert np.isclose(sum(flows), 1.0)


def test_independent_product_cost():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert independent_product_cost(C, [0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.5)


def test_validation():
    with pytest.raises(ValidationError):
        solve_exact([[0.0, 1.0]], [1.0], [0.5, 0.6])
    with pytest.raises(ValidationError):
        solve_exact([[np.nan]], [1.0], [1.0])
    with pytest.raises(ValidationError):
        solve_exact([[0.0, 1.0]], [1.0], [1.0])


def test_disjointify():
    p, q, a = disjointify([0.7, 0.3], [0.5, 0.5])
    assert a == pytest.approx(0.2)
    assert np.allclose(p, [1.0, 0.0]) and np.allclose(q, [0.0, 1.0])
    with pytest.raises(ValidationError):
        disjointify([0.5, 0.5], [0.5, 0.5])


def test_pure_python_fallback_selected_at_import():
    code = (
        "import numpy as np\n"
        "from statcoupling import transport as t\n"
        "assert t.BACKEND == 'python' and t.available_backends() == ['python']\n"
        "p = t.solve_exact(np.array([[0.0, 1.0], [1.0, 0.0]]), [0.7, 0.3], [0.5, 0.5])\n"
        "print(p.cost)\n"
    )
    env = {**os.environ, "STATCOUPLING_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert float(out.stdout) == pytest.approx(0.2)
