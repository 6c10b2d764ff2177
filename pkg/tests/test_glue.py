from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from statcoupling import ValidationError
from statcoupling.glue import FiniteJoint, alternating_sign_harness, conditional_independence_gap, glue_finite

H = Fraction(1, 2)
Q = Fraction(1, 4)


def exact(rows):
    return np.array([[Fraction(v) for v in r] for r in rows], dtype=object)


DIAG = FiniteJoint(([0, 1], [0, 1]), exact([[H, 0], [0, H]]))
ANTI = FiniteJoint(([0, 1], [0, 1]), exact([[0, H], [H, 0]]))
PROD = FiniteJoint(([0, 1], [0, 1]), exact([[Q, Q], [Q, Q]]))


def test_diagonal_glue():
    g = glue_finite(DIAG, DIAG)
    assert g.mass[0, 0, 0] == H and g.mass[1, 1, 1] == H
    assert sum(g.mass.ravel()) == 1


def test_product_glue_uniform():
    g = glue_finite(PROD, PROD)
    assert all(v == Fraction(1, 8) for v in g.mass.ravel())


def test_diagonal_then_anti():
    g = glue_finite(DIAG, ANTI)
    support = {idx for idx, v in np.ndenumerate(g.mass) if v != 0}
    assert support == {(0, 0, 1), (1, 1, 0)}
    assert np.array_equal(g.marginal((0, 1)).mass, DIAG.mass)
    assert np.array_equal(g.marginal((1, 2)).mass, ANTI.mass)
    assert conditional_independence_gap(g) == 0


def random_pair(rng, k, m, l, zero_middle):
    mid = rng.random(m)
    if zero_middle:
        mid[0] = 0.0
    mid /= mid.sum()
    a = rng.random((k, m))
    b = rng.random((m, l))
    p12 = a / a.sum(axis=0, keepdims=True) * mid[None, :]
    p23 = b / b.sum(axis=1, keepdims=True) * mid[:, None]
    p12[:, mid == 0] = 0
    p23[mid == 0, :] = 0
    return (
        FiniteJoint((list(range(k)), list(range(m))), p12),
        FiniteJoint((list(range(m)), list(range(l))), p23),
    )


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.booleans())
def test_marginals_preserved(seed, k, m, l, zero_middle):
    rng = np.random.default_rng(seed)
    p12, p23 = random_pair(rng, k, m, l, zero_middle and m > 1)
    g = glue_finite(p12, p23)
    assert np.max(np.abs(g.marginal((0, 1)).mass - p12.mass)) <= 1e-12
    assert np.max(np.abs(g.marginal((1, 2)).mass - p23.mass)) <= 1e-12
    assert conditional_independence_gap(g) <= 1e-12


def test_exact_inputs_stay_exact():
    mid = [Fraction(1, 3), Fraction(2, 3)]
    p12 = exact([[mid[0] * Fraction(1, 5), mid[1] * Fraction(3, 7)], [mid[0] * Fraction(4, 5), mid[1] * Fraction(4, 7)]])
    p23 = exact([[mid[0] * Fraction(1, 2), mid[0] * Fraction(1, 2)], [mid[1] * Fraction(1, 9), mid[1] * Fraction(8, 9)]])
    g = glue_finite(FiniteJoint(([0, 1], [0, 1]), p12), FiniteJoint(([0, 1], [0, 1]), p23))
    assert all(isinstance(v, Fraction) for v in g.mass.ravel())
    assert np.array_equal(g.marginal((0, 1)).mass, p12)
    assert np.array_equal(g.marginal((1, 2)).mass, p23)


def test_middle_mismatch():
    other = FiniteJoint(([0, 1], [0, 1]), np.array([[0.1, 0.2], [0.3, 0.4]]))
    with pytest.raises(ValidationError, match="middle"):
        glue_finite(FiniteJoint(([0, 1], [0, 1]), np.array([[0.25, 0.25], [0.25, 0.25]])), other)
    with pytest.raises(ValidationError, match="middle"):
        glue_finite(DIAG, FiniteJoint(([0, 2], [0, 1]), DIAG.mass))


def test_joint_validation():
    with pytest.raises(ValidationError):
        FiniteJoint(([0, 1], [0, 1]), np.array([[0.5, 0.5], [0.5, 0.5]]))
    with pytest.raises(ValidationError):
        FiniteJoint(([0, 1],), np.array([0.5, 0.5]))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_alternating_sign_harness(seed):
    out = alternating_sign_harness(1000, seed)
    assert out["holds"]
    t = np.arange(1000)
    assert np.array_equal(out["X"] * out["Y"] * out["Z"], (-1) ** t)
    # each coordinate separately still looks like a fair coin
    assert abs(out["Z"].mean()) < 4 / np.sqrt(1000)
