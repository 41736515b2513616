import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from aktest import reduction as R
from aktest.distributions import DistributionError, Pmf, RationalPmf, ak_distance, l1_distance, uniform
from aktest.samplers import PmfSource, Seed


def test_subdivision_blocks():
    smap = R.build_subdivision(RationalPmf([2, 1, 1], 4))
    assert [smap.block(i) for i in (1, 2, 3)] == [(1, 2), (3, 3), (4, 4)]
    assert smap.N == 4


def test_subdivision_of_uniform_is_identity():
    smap = R.build_subdivision(RationalPmf([1] * 7, 7))
    assert [smap.block(i) for i in range(1, 8)] == [(i, i) for i in range(1, 8)]


def test_subdivision_zero_mass_point_has_empty_block():
    smap = R.build_subdivision(RationalPmf([2, 0], 2))
    assert smap.block(1) == (1, 2)
    first, last = smap.block(2)
    assert first > last


def test_rationalize_exact_cases():
    assert list(R.rationalize(Pmf([1 / 3, 2 / 3]), 3).alphas) == [1, 2]
    assert list(R.rationalize(Pmf([0.3, 0.7]), 10).alphas) == [3, 7]


def test_rationalize_apportionment_error():
    p = Pmf([1 / math.pi, 1 - 1 / math.pi])
    r = R.rationalize(p, 10**6)
    assert r.denom == 10**6 and sum(r.alphas) == 10**6
    assert l1_distance(p, r.to_pmf()) <= 2e-6


@given(
    st.lists(st.one_of(st.just(0.0), st.floats(1e-9, 1.0)), min_size=1, max_size=40).filter(lambda w: sum(w) > 0),
    st.integers(0, 12),
)
@settings(max_examples=200, deadline=None)
def test_rationalize_preserves_support_and_error(w, extra_bits):
    p = Pmf(w)
    N = max(np.count_nonzero(p.weights), 1) << extra_bits
    r = R.rationalize(p, N)
    a = np.asarray(r.alphas)
    assert a.sum() == N
    assert np.array_equal(a > 0, p.weights > 0)
    # largest remainder: each point within one unit, plus the support top-ups
    assert np.max(np.abs(a - p.weights * N)) <= 1 + np.count_nonzero(p.weights)


def test_rationalize_rejects_too_coarse_precision():
    with pytest.raises(DistributionError):
        R.rationalize(Pmf([1, 1, 1]), 2)


def test_default_precision():
    N = R.default_precision(1024, 0.25)
    assert N & (N - 1) == 0 and 1024 / N <= 2**-20 * 0.25
    assert R.default_precision(2, 0.9) >= 2**16
    big = R.default_precision(2**20, 0.01, modulus=2**30)
    assert big * 2**30 <= 2**62


def test_stretch_examples():
    assert R.stretch_to_divisible(12, 8) == (2, 24)
    assert R.stretch_to_divisible(32, 32) == (1, 32)
    assert R.stretch_to_divisible(7, 32) == (32, 224)


def test_transform_sample_examples():
    smap = R.build_subdivision(RationalPmf([2, 1, 1], 4))
    rng = np.random.default_rng(0)
    outs = {R.transform_sample(smap, 1, rng) for _ in range(200)}
    assert outs == {1, 2}
    assert R.transform_sample(smap, 3, rng) == 4
    ident = R.build_subdivision(RationalPmf([1] * 5, 5))
    assert list(R.transform_samples(ident, [5, 1, 3], rng)) == [5, 1, 3]


def test_transform_sample_support_violation():
    smap = R.build_subdivision(RationalPmf([2, 0], 2))
    with pytest.raises(R.SupportViolation) as info:
        R.transform_sample(smap, 2, Seed(1))
    assert info.value.point == 2


def test_transform_with_stretch_stays_in_block():
    smap = R.build_subdivision(RationalPmf([3, 1], 4))
    x = R.transform_samples(smap, np.array([1] * 1000 + [2] * 1000), np.random.default_rng(1), stretch=5)
    assert set(x[:1000]) == set(range(1, 16))
    assert set(x[1000:]) == set(range(16, 21))


def test_transform_fidelity_chi_square():
    p = RationalPmf([3, 1, 4, 1, 5, 2], 16)
    smap = R.build_subdivision(p)
    src = PmfSource(p.to_pmf(), Seed(3))
    x = R.transform_samples(smap, src.sample(10**6), np.random.default_rng(4), stretch=2)
    obs = np.bincount(x - 1, minlength=32)
    # the pushforward of p itself is uniform on the stretched domain
    assert stats.chisquare(obs).pvalue > 1e-6


def _random_rational(rng, n, denom):
    cuts = np.sort(rng.integers(0, denom + 1, size=n - 1))
    return RationalPmf(np.diff(np.concatenate([[0], cuts, [denom]])).tolist(), denom)


@pytest.mark.parametrize("seed", range(40))
def test_pushforward_preserves_ak_exactly(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    p = _random_rational(rng, n, int(rng.integers(n, 20)))
    p = RationalPmf([a + 1 for a in p.alphas], p.denom + n)  # full support
    q = _random_rational(rng, n, 30)
    k = int(rng.integers(2, n + 1)) if n > 2 else 2
    smap = R.build_subdivision(p)
    stretch = int(rng.integers(1, 3))
    p_push = R.pushforward(p, smap, stretch)
    assert all(f == Fraction(1, smap.N * stretch) for f in p_push.fractions())
    q_push = R.pushforward(q, smap, stretch)
    assert ak_distance(p_push, q_push, k).value == ak_distance(p, q, k).value


def test_pushforward_rejects_mass_off_support():
    smap = R.build_subdivision(RationalPmf([2, 0], 2))
    with pytest.raises(DistributionError):
        R.pushforward(RationalPmf([1, 1], 2), smap)


@pytest.mark.parametrize("seed", range(10))
def test_completeness_under_rationalization(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    p = Pmf(rng.dirichlet(np.ones(n)))
    N = 4096
    smap = R.build_subdivision(R.rationalize(p, N))
    push = R.pushforward(p, smap)
    k = int(min(n, 8)) if n >= 2 else 2
    assert ak_distance(push, uniform(N), k).value <= n / N + 1e-12


def test_stretched_bin_masses_match_exact_pushforward():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(2, 30))
        w = rng.dirichlet(np.ones(n))
        alphas = rng.integers(0, 6, size=n)
        alphas[0] = max(alphas[0], 1)
        smap = R.build_subdivision(RationalPmf(alphas.tolist()))
        s, total = R.stretch_to_divisible(smap.N, 8)
        masses, violation = R.stretched_bin_masses(Pmf(w), smap, s, 8)
        exact = R.pushforward(Pmf(w), smap, s).weights.reshape(8, -1).sum(axis=1)
        assert violation == pytest.approx(w[alphas == 0].sum(), abs=1e-15)
        # the pushforward pmf is renormalized after dropping the off-support mass
        assert np.allclose(masses, exact * (1 - violation), atol=1e-14)


def test_stretched_source_counts_and_violation():
    p = RationalPmf([1, 3], 4)
    smap = R.build_subdivision(p)
    src = R.StretchedSource(PmfSource(p.to_pmf(), Seed(1)), smap, 2, Seed(2))
    assert src.n == 8
    c = src.sample_counts(80000, bins=4)
    assert c.sum() == 80000 and src.drawn == 80000
    assert stats.chisquare(c).pvalue > 1e-6
    bad = R.StretchedSource(PmfSource(Pmf([0.5, 0.5]), Seed(1)), R.build_subdivision(RationalPmf([2, 0])), 1)
    with pytest.raises(R.SupportViolation):
        bad.sample_counts(100, bins=2)
