import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import transport_vertices
from statcoupling import EnumerationTooLarge, Source, ValidationError
from statcoupling.ctools import HammingCost, LogCost, SquaredCost
from statcoupling.equivariant import Quadratic, coupling_cost_exact, field_code
from statcoupling.model import Pushforward
from statcoupling.rhobar import (
    FieldPushforward,
    FolnerBox,
    IIDField,
    box_sites,
    field_coupling_cost_exact,
    folner_ratio,
    make_field,
    rho_field,
    rho_n,
    rho_sequence,
    superadditivity_violations,
)

BERN_P = Source.iid([0, 1], [0.7, 0.3])
BERN_Q = Source.iid([0, 1], [0.5, 0.5])


def random_markov(rng, K):
    P = rng.random((K, K)) + 0.05
    return Source.markov(list(range(K)), P / P.sum(axis=1, keepdims=True))


def test_identical_sources_zero(chain):
    for n in (1, 2, 3):
        assert rho_n(chain, chain, SquaredCost(), n)[0] == pytest.approx(0.0, abs=1e-15)


def test_bernoulli_n1_n2():
    assert rho_n(BERN_P, BERN_Q, HammingCost(), 1)[0] == pytest.approx(0.2, abs=1e-12)
    value, plan = rho_n(BERN_P, BERN_Q, HammingCost(), 2)
    assert value == pytest.approx(0.2, abs=1e-12)
    assert plan.certified()


def test_bernoulli_n2_against_vertex_enumeration():
    # 4 x 4 plan polytope is too large for the vertex oracle; use the 2 x 2 sub-blocks:
    # windows factor, so the product of two optimal 1-window plans is feasible with cost 0.2
    mp = BERN_P.window_marginal(2)
    mq = BERN_Q.window_marginal(2)
    C = HammingCost().window_matrix(mp.points, mq.points)
    plan1 = rho_n(BERN_P, BERN_Q, HammingCost(), 1)[1].mass
    product = np.kron(plan1, plan1)
    assert np.sum(product * C) == pytest.approx(0.2)
    assert rho_n(BERN_P, BERN_Q, HammingCost(), 1)[0] == pytest.approx(
        transport_vertices(HammingCost().window_matrix(BERN_P.window_marginal(1).points, BERN_Q.window_marginal(1).points), [0.7, 0.3], [0.5, 0.5])
    )


def test_rho_sequence_bernoulli():
    rep = rho_sequence(BERN_P, BERN_Q, HammingCost(), 4)
    assert rep.rho_n == pytest.approx([0.2] * 4, abs=1e-9)
    assert (rep.lower, rep.upper) == pytest.approx((0.2, 0.5))
    assert rep.superadditivity_violations == []
    assert rep.truncated and rep.as_dict()["truncated_at_n_max"]


def test_rho_sequence_parallel_matches_serial(chain):
    other = Source.markov([-1, 1], [[0.5, 0.5], [0.3, 0.7]])
    a = rho_sequence(chain, other, SquaredCost(), 4)
    b = rho_sequence(chain, other, SquaredCost(), 4, jobs=3)
    assert a.rho_n == b.rho_n


def test_rho_sequence_pushforward_below_stationary_cost(coin, eps_code):
    rep = rho_sequence(coin, Pushforward(coin, eps_code), SquaredCost(), 3)
    assert max(rep.rho_n) <= 0.125 + 1e-8
    assert rep.superadditivity_violations == []


def test_superadditivity_helper():
    assert superadditivity_violations([1.0, 2.0, 3.0]) == []
    v = superadditivity_violations([1.0, 0.5])
    assert v and v[0]["m"] == 1 and v[0]["n"] == 1


@given(st.integers(0, 10_000))
def test_fekete_and_sandwich_random_markov(seed):
    rng = np.random.default_rng(seed)
    P = random_markov(rng, int(rng.integers(2, 4)))
    Q = random_markov(rng, int(rng.integers(2, 4)))
    rep = rho_sequence(P, Q, SquaredCost(), 3)
    assert rep.superadditivity_violations == []
    assert rep.bound_violations == []
    assert rep.lower <= rep.rho_bar + 1e-12


def test_log_cost_domain_error():
    a = Source.iid([0.5, 0.7], [0.5, 0.5])
    with pytest.raises(ValueError):
        rho_n(a, a, LogCost((0, 1), (-1, 0)), 1)


def test_rho_n_cap():
    big = Source.iid(range(10), np.full(10, 0.1))
    with pytest.raises(EnumerationTooLarge):
        rho_n(big, big, SquaredCost(), 5, cap=1000)


def test_sandwich_markov_sources(chain, eps_code):
    exact = coupling_cost_exact(chain, eps_code, SquaredCost())
    for n in (1, 2, 3):
        assert rho_n(chain, Pushforward(chain, eps_code), SquaredCost(), n)[0] <= exact + 1e-8


# fields ----------------------------------------------------------------------

FP = IIDField([0, 1], [0.7, 0.3], d=2)
FQ = IIDField([0, 1], [0.5, 0.5], d=2)


def test_field_identical_zero():
    assert rho_field(FP, FP, HammingCost(), box_sites((2, 2))) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("shape", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_field_bernoulli(shape):
    assert rho_field(FP, FQ, HammingCost(), box_sites(shape)) == pytest.approx(0.2, abs=1e-9)


def test_field_one_by_one_equals_rho1():
    assert rho_field(FP, FQ, HammingCost(), FolnerBox(2, 0)) == pytest.approx(rho_n(BERN_P, BERN_Q, HammingCost(), 1)[0])


def test_field_validation():
    with pytest.raises(ValidationError, match="unsupported field kind"):
        make_field({"kind": "gibbs", "symbols": [0, 1], "pmf": [0.5, 0.5]})
    with pytest.raises(ValidationError):
        rho_field(FP, BERN_Q, HammingCost(), box_sites((1, 1)))
    with pytest.raises(EnumerationTooLarge):
        rho_field(FP, FQ, HammingCost(), FolnerBox(2, 2), cap=1000)


def test_field_pushforward_sandwich():
    coin = IIDField([-1, 1], [0.5, 0.5], d=2)
    code = field_code(Quadratic.cross_term(0.25), [(0, 0), (1, 0)])
    exact = field_coupling_cost_exact(coin, code, SquaredCost())
    assert exact == pytest.approx(0.125, abs=1e-12)
    push = FieldPushforward(coin, code)
    for shape in [(1, 1), (2, 1), (2, 2)]:
        assert rho_field(coin, push, SquaredCost(), box_sites(shape)) <= exact + 1e-8


def test_folner_examples():
    assert folner_ratio(FolnerBox(1, 10), 0) == 1.0
    assert folner_ratio(FolnerBox(1, 10), 1) == pytest.approx(20 / 21, abs=1e-15)
    assert folner_ratio(FolnerBox(2, 1), (1, 0)) == pytest.approx(6 / 9, abs=1e-15)
    assert len(FolnerBox(2, 3).sites) == 49 == len(FolnerBox(2, 3))


@pytest.mark.parametrize("d,h", [(1, (1,)), (1, (3,)), (2, (1, 0)), (2, (1, -2))])
def test_folner_matches_set_count_and_increases(d, h):
    prev = -1.0
    for n in range(0, 51):
        box = FolnerBox(d, n)
        if n <= 8:
            S = {tuple(s) for s in box.sites.tolist()}
            shifted = {tuple(np.add(s, h)) for s in S}
            assert folner_ratio(box, h) == len(S & shifted) / len(S)
        r = folner_ratio(box, h)
        assert r >= prev
        prev = r
    assert prev > 0.9


def test_folner_validation():
    with pytest.raises(ValidationError):
        folner_ratio(FolnerBox(2, 1), (1,))
    with pytest.raises(ValidationError):
        FolnerBox(0, 1)
