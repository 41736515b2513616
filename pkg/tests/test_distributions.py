import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aktest import distributions as D
from aktest.ak_tester import levels_for
from aktest.distributions import IntervalPartition, Pmf, RationalPmf, uniform

from oracles import ak_by_enumeration, ssl2_by_enumeration

Q = Pmf([0.5, 0, 0.5, 0])
QR = RationalPmf([1, 0, 1, 0], 2)
U4R = RationalPmf([1, 1, 1, 1], 4)


@st.composite
def pmf_pairs(draw, max_n=24, min_n=2):
    n = draw(st.integers(min_n, max_n))
    w = st.lists(st.integers(0, 20), min_size=n, max_size=n).filter(lambda a: sum(a) > 0)
    return Pmf(draw(w)), Pmf(draw(w))


@st.composite
def rational_pairs(draw, max_n=9):
    n = draw(st.integers(2, max_n))
    w = st.lists(st.integers(0, 12), min_size=n, max_size=n).filter(lambda a: sum(a) > 0)
    return RationalPmf(draw(w)), RationalPmf(draw(w))


# --- types ------------------------------------------------------------------


def test_pmf_normalizes_and_freezes():
    p = Pmf([1, 1, 2])
    assert np.allclose(p.weights, [0.25, 0.25, 0.5])
    assert p.n == 3
    with pytest.raises(ValueError):
        p.weights[0] = 1.0


@pytest.mark.parametrize("bad", [[], [-0.1, 1.1], [0, 0], [float("nan"), 1]])
def test_pmf_rejects_invalid(bad):
    with pytest.raises(D.DistributionError):
        Pmf(bad)


def test_single_point_pmf_is_legal_and_distances_vanish():
    p = Pmf([1.0])
    assert D.l1_distance(p, p) == 0
    assert D.l2_distance(p, p) == 0
    assert D.kolmogorov_distance(p, p) == 0


def test_rational_pmf_invariants():
    r = RationalPmf([1, 2, 1], 4)
    assert r.fractions() == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]
    with pytest.raises(D.DistributionError):
        RationalPmf([1, 2], 4)
    with pytest.raises(D.DistributionError):
        RationalPmf([-1, 2], 1)
    assert RationalPmf.from_fractions([Fraction(1, 3), Fraction(2, 3)]).alphas == (1, 2)


def test_interval_partition_invariants():
    part = IntervalPartition.from_intervals([(1, 2), (3, 4)])
    assert part.bounds == (0, 2, 4) and part.ell == 2 and part.n == 4
    assert part.intervals() == [(1, 2), (3, 4)]
    for bad in ([1, 4], [0], [0, 2, 2, 4]):
        with pytest.raises(D.DistributionError):
            IntervalPartition(bad)
    with pytest.raises(D.DistributionError):
        IntervalPartition.from_intervals([(1, 2), (4, 4)])


# --- reduce_pmf, l1, l2, kolmogorov -------------------------------------------


@pytest.mark.parametrize(
    "p, bounds, expected",
    [
        (uniform(4), [0, 2, 4], [0.5, 0.5]),
        (Q, [0, 2, 4], [0.5, 0.5]),
        (Pmf([0.1, 0.2, 0.3, 0.4]), [0, 1, 4], [0.1, 0.9]),
    ],
)
def test_reduce_pmf_examples(p, bounds, expected):
    assert np.allclose(D.reduce_pmf(p, IntervalPartition(bounds)).weights, expected, atol=1e-15)


def test_reduce_pmf_domain_mismatch():
    with pytest.raises(D.DomainMismatchError):
        D.reduce_pmf(uniform(4), IntervalPartition([0, 5]))


def test_l1_examples():
    assert D.l1_distance(Q, Q) == 0
    assert D.l1_distance(uniform(2), Pmf([1, 0])) == pytest.approx(1.0, abs=1e-15)
    assert D.l1_distance(uniform(4), Q) == pytest.approx(1.0, abs=1e-15)
    assert D.l1_distance(U4R, QR) == 1


def test_l2_examples():
    assert D.l2_distance(Q, Q) == 0
    assert D.l2_distance(uniform(2), Pmf([1, 0])) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert D.l2_distance(uniform(4), Q) == pytest.approx(0.5, abs=1e-15)


def test_kolmogorov_examples():
    assert D.kolmogorov_distance(Q, Q) == 0
    assert D.kolmogorov_distance(uniform(4), Q) == pytest.approx(0.25, abs=1e-15)
    assert D.kolmogorov_distance(U4R, QR) == Fraction(1, 4)


def test_domain_mismatch_errors():
    for f in (D.l1_distance, D.l2_distance, D.kolmogorov_distance):
        with pytest.raises(D.DomainMismatchError):
            f(uniform(3), uniform(4))
    with pytest.raises(D.DomainMismatchError):
        D.ak_distance(uniform(3), uniform(4), 2)


# --- A_k distance ------------------------------------------------------------


def test_ak_examples():
    assert D.ak_distance(uniform(4), Q, 4).value == pytest.approx(1.0, abs=1e-15)
    rep = D.ak_distance(uniform(4), Q, 2)
    assert rep.value == pytest.approx(0.5, abs=1e-15)
    assert D.ak_distance(U4R, QR, 2).value == Fraction(1, 2)
    assert D.ak_distance(U4R, QR, 4).value == 1
    assert D.ak_distance(Q, Q, 3).value == 0


def test_ak_witness_for_example():
    rep = D.ak_distance(U4R, QR, 2)
    assert rep.witness.intervals() in ([(1, 1), (2, 4)], [(1, 3), (4, 4)])


@pytest.mark.parametrize("k", [0, 1, 5])
def test_ak_k_out_of_range(k):
    with pytest.raises(D.DistributionError):
        D.ak_distance(uniform(4), Q, k)


def test_bruteforce_examples_and_refusal():
    assert D.ak_distance_bruteforce(U4R, QR, 2) == Fraction(1, 2)
    assert D.ak_distance_bruteforce(QR, QR, 3) == 0
    big = uniform(17)
    with pytest.raises(D.DistributionError):
        D.ak_distance_bruteforce(big, big, 2)


def test_bruteforce_random_n8_k3_matches_dp():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p, q = Pmf(rng.dirichlet(np.ones(8))), Pmf(rng.dirichlet(np.ones(8)))
        assert abs(D.ak_distance(p, q, 3).value - D.ak_distance_bruteforce(p, q, 3)) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(rational_pairs())
def test_ak_matches_independent_enumeration(pair):
    p, q = pair
    pf, qf = p.fractions(), q.fractions()
    for k in range(2, p.n + 1):
        assert D.ak_distance(p, q, k).value == ak_by_enumeration(pf, qf, k)


@settings(max_examples=150, deadline=None)
@given(pmf_pairs())
def test_ak_monotone_in_k_and_bounded_by_l1(pair):
    p, q = pair
    vals = [D.ak_distance(p, q, k).value for k in range(2, p.n + 1)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    l1 = D.l1_distance(p, q)
    assert vals[-1] <= l1 + 1e-12
    assert abs(vals[-1] - l1) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(pmf_pairs(max_n=64))
def test_a2_equals_twice_kolmogorov(pair):
    p, q = pair
    assert abs(D.ak_distance(p, q, 2).value - 2 * D.kolmogorov_distance(p, q)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(pmf_pairs(max_n=40), st.integers(2, 40))
def test_ak_witness_reproduces_value(pair, k):
    p, q = pair
    k = min(k, p.n)
    rep = D.ak_distance(p, q, k)
    assert rep.witness.ell <= k and rep.witness.n == p.n
    rp, rq = D.reduce_pmf(p, rep.witness), D.reduce_pmf(q, rep.witness)
    assert abs(D.l1_distance(rp, rq) - rep.value) <= 1e-12


def test_ak_symmetric_and_zero_on_identical():
    rng = np.random.default_rng(3)
    p, q = Pmf(rng.random(30)), Pmf(rng.random(30))
    for k in (2, 7, 30):
        assert D.ak_distance(p, q, k).value == pytest.approx(D.ak_distance(q, p, k).value, abs=1e-15)
        assert D.ak_distance(p, p, k).value == 0


# --- discrepancy, width, scale-sensitive L2 ----------------------------------


def test_discrepancy_and_width_examples():
    assert D.discrepancy(uniform(6), (2, 5)) == pytest.approx(0, abs=1e-15)
    assert D.discrepancy(Q, (2, 2)) == pytest.approx(0.25)
    assert D.width((2, 2), 4) == 0.25
    assert D.discrepancy(Q, (1, 2)) == pytest.approx(0, abs=1e-15)
    assert D.discrepancy(QR, (2, 2)) == Fraction(1, 4)
    with pytest.raises(D.DistributionError):
        D.discrepancy(Q, (3, 2))
    with pytest.raises(D.DistributionError):
        D.width((0, 2), 4)


def test_ssl2_uniform_is_zero():
    for k in (2, 3, 8):
        assert D.scale_sensitive_l2(uniform(8), k).value == pytest.approx(0, abs=1e-30)


def test_ssl2_example_against_enumeration():
    rep = D.scale_sensitive_l2(Q, 2)
    assert rep.value == pytest.approx(ssl2_by_enumeration([0.5, 0, 0.5, 0], 2), rel=1e-12)
    assert all(length <= 2 for length in rep.witness.lengths())


@settings(max_examples=60, deadline=None)
@given(pmf_pairs(max_n=12), st.integers(2, 12))
def test_ssl2_matches_enumeration_and_witness(pair, k):
    q = pair[0]
    k = min(k, q.n)
    rep = D.scale_sensitive_l2(q, k)
    assert rep.value == pytest.approx(ssl2_by_enumeration(list(q.weights), k), rel=1e-9, abs=1e-15)
    assert max(rep.witness.lengths()) <= q.n // k
    assert abs(D.ssl2_objective(q, rep.witness) - rep.value) <= 1e-12


def test_ssl2_k_out_of_range():
    with pytest.raises(D.DistributionError):
        D.scale_sensitive_l2(uniform(4), 5)


def _dyadic_ssl2_sum(q: Pmf, k: int, j0: int) -> float:
    total = []
    for j in range(j0):
        ell = k * 2**j
        total.append(D.ssl2_objective(q, IntervalPartition.equal(q.n, ell)))
    return math.fsum(total)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 4, 8]), st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_scale_sensitive_bounded_by_dyadic_sum(k, log_width, seed):
    rng = np.random.default_rng(seed)
    n = k * 2**log_width
    q = Pmf(rng.dirichlet(np.ones(n) * rng.choice([0.3, 1.0, 4.0])))
    eps = min(float(D.ak_distance(q, uniform(n), k).value), 0.99)
    j0 = min(levels_for(eps), log_width + 1)
    assert D.scale_sensitive_l2(q, k).value <= 1e8 * _dyadic_ssl2_sum(q, k, j0) * (1 + 1e-9)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 4, 8]), st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_scale_sensitive_dominates_squared_ak(k, mult, seed):
    rng = np.random.default_rng(seed)
    n = k * mult
    q = Pmf(rng.dirichlet(np.ones(n)))
    ak = D.ak_distance(q, uniform(n), k).value
    assert D.scale_sensitive_l2(q, k).value >= ak * ak / (2 * k) ** 0.875 * (1 - 1e-9)


def test_compensated_cumsum():
    vals = [1e16, 1.0, -1e16, 1.0]
    c = D.compensated_cumsum(vals)
    assert c[0] == 0 and c[-1] == 2.0 and c.size == 5
