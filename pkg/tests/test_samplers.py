import math

import numpy as np
import pytest
from scipy import stats

from aktest import samplers as S
from aktest.distributions import DistributionError, Pmf, ak_distance, l1_distance, uniform


def test_seed_is_deterministic_and_streams_differ():
    a = S.Seed(42, (1, 2)).rng().integers(0, 2**63, size=4)
    b = S.Seed(42, (1, 2)).rng().integers(0, 2**63, size=4)
    c = S.Seed(42, (1, 3)).rng().integers(0, 2**63, size=4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert S.Seed(1).child(5).stream == (0, 5)


def test_seed_pins_the_generator():
    # pinned output: PCG64 seeded through SeedSequence(entropy=7, spawn_key=(0,))
    first = S.Seed(7).rng().integers(0, 2**32)
    ref = np.random.Generator(np.random.PCG64(np.random.SeedSequence(7, spawn_key=(0,)))).integers(0, 2**32)
    assert first == ref


def test_seed_rejects_out_of_range():
    with pytest.raises(ValueError):
        S.Seed(-1)
    with pytest.raises(ValueError):
        S.Seed(1, (2**64,))


def test_draw_point_mass():
    h = S.SamplerHandle(Pmf([1, 0]))
    assert np.all(S.draw(h, S.Seed(1), 1000) == 1)


def test_draw_uniform_two_points_frequency():
    x = S.draw(S.SamplerHandle(uniform(2)), S.Seed(2), 10**6)
    freq = np.mean(x == 1)
    assert abs(freq - 0.5) <= 5 * math.sqrt(0.25 / 10**6)


def test_draw_same_seed_same_sequence():
    h = S.SamplerHandle(Pmf(np.arange(1, 11)))
    assert np.array_equal(S.draw(h, S.Seed(9, (4,)), 500), S.draw(h, S.Seed(9, (4,)), 500))


def test_draw_never_returns_zero_mass_points():
    h = S.SamplerHandle(Pmf([0, 1, 0, 2, 0]))
    x = S.draw(h, S.Seed(3), 10**5)
    assert set(np.unique(x)) <= {2, 4}


@pytest.mark.parametrize("seed", range(20))
def test_sampling_fidelity_chi_square(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(2, 65))
    p = Pmf(rng.dirichlet(np.ones(n)) + 1e-3)
    x = S.draw(S.SamplerHandle(p), S.Seed(seed), 10**6)
    obs = np.bincount(x - 1, minlength=n)
    assert stats.chisquare(obs, 10**6 * p.weights).pvalue > 1e-6


def test_counts_match_draw_distribution():
    p = Pmf(np.arange(1, 9))
    h = S.SamplerHandle(p)
    c = h.counts(np.random.default_rng(0), 10**6, bins=4)
    exp = 10**6 * p.weights.reshape(4, 2).sum(axis=1)
    assert stats.chisquare(c, exp).pvalue > 1e-6
    with pytest.raises(ValueError):
        h.counts(np.random.default_rng(0), 10, bins=3)


def test_poisson_zero_and_negative():
    assert S.draw_poisson(0, S.Seed(1)) == 0
    with pytest.raises(ValueError):
        S.draw_poisson(-1, S.Seed(1))


@pytest.mark.parametrize("lam", [3.0, 100.0, 1e6])
def test_poisson_moments(lam):
    x = S.draw_poisson(lam, S.Seed(5), size=10**5).astype(float)
    se = math.sqrt(lam / 10**5)
    assert abs(x.mean() - lam) <= 5 * se
    # variance of the sample variance of a Poisson is about (lam + 2 lam^2) / N
    assert abs(x.var(ddof=1) - lam) <= 5 * math.sqrt((lam + 2 * lam * lam) / 10**5)


def test_array_source_replays_and_runs_out():
    src = S.ArraySource([1, 2, 3, 2], n=3)
    assert list(src.sample(3)) == [1, 2, 3]
    assert src.drawn == 3
    with pytest.raises(S.UnderSampledError):
        src.sample(2)
    with pytest.raises(ValueError):
        S.ArraySource([0, 1])


def test_pmf_source_counts_binning():
    src = S.PmfSource(uniform(8), S.Seed(1))
    c = S.source_counts(src, 1000, 8, 4)
    assert c.sum() == 1000 and c.size == 4 and src.drawn == 1000
    arr = S.ArraySource([1, 2, 8, 8])
    assert list(S.source_counts(arr, 4, 8, 2)) == [2, 2]


# --- generators -------------------------------------------------------------------


def test_kflat_examples():
    assert np.allclose(S.gen_kflat(12, 1, S.Seed(1)).weights, 1 / 12)
    for s in range(50):
        rng = np.random.default_rng(s)
        n = int(rng.integers(1, 80))
        k = int(rng.integers(1, n + 1))
        assert S.is_kflat(S.gen_kflat(n, k, S.Seed(s)), k)
    assert S.gen_kflat(5, 5, S.Seed(2)).n == 5
    with pytest.raises(DistributionError):
        S.gen_kflat(3, 4)


CLASS_CASES = [
    ("tmodal", lambda n, s: S.gen_tmodal(n, 1 + s % 4, S.Seed(s)), lambda p, s: S.is_tmodal(p, 1 + s % 4)),
    ("logconcave", lambda n, s: S.gen_logconcave(n, S.Seed(s)), lambda p, s: S.is_logconcave(p)),
    ("mhr", lambda n, s: S.gen_mhr(n, S.Seed(s)), lambda p, s: S.is_mhr(p)),
    (
        "piecewise-poly",
        lambda n, s: S.gen_piecewise_poly(n, 1 + s % 3, s % 4, S.Seed(s)),
        lambda p, s: S.is_piecewise_poly(p, 1 + s % 3, s % 4),
    ),
    ("kflat", lambda n, s: S.gen_kflat(n, 1 + s % 7, S.Seed(s)), lambda p, s: S.is_kflat(p, 1 + s % 7)),
]


@pytest.mark.parametrize("name, make, check", CLASS_CASES, ids=[c[0] for c in CLASS_CASES])
def test_class_membership_on_1000_instances(name, make, check):
    failures = []
    for s in range(1000):
        n = 8 + (s * 37) % 300
        p = make(n, s)
        assert abs(p.weights.sum() - 1) <= 1e-12
        if not check(p, s):
            failures.append(s)
    assert failures == []


def test_generators_are_pure_functions_of_seed():
    for make in (
        lambda s: S.gen_tmodal(50, 2, s),
        lambda s: S.gen_logconcave(50, s),
        lambda s: S.gen_mhr(50, s),
        lambda s: S.gen_piecewise_poly(50, 3, 2, s),
        lambda s: S.gen_kflat(50, 4, s),
    ):
        assert make(S.Seed(11)) == make(S.Seed(11))


def test_tmodal_one_is_unimodal():
    for s in range(50):
        assert S.count_local_maxima(S.gen_tmodal(100, 1, S.Seed(s))) == 1


def test_mixture():
    a, b = Pmf([1, 0, 0]), Pmf([0, 0, 1])
    m = S.gen_mixture([a, b], [0.25, 0.75])
    assert np.allclose(m.weights, [0.25, 0, 0.75])
    lazy = S.gen_mixture([lambda r: S.gen_tmodal(40, 1, r)] * 3, [0.2, 0.3, 0.5], S.Seed(4))
    assert S.is_tmodal(lazy, 3)
    with pytest.raises(DistributionError):
        S.gen_mixture([a, b], [0.5, 0.6])
    with pytest.raises(DistributionError):
        S.gen_mixture([a, uniform(4)], [0.5, 0.5])


def test_predicates_on_handmade_sequences():
    assert not S.is_logconcave([1, 0, 1])
    assert S.is_logconcave([0, 1, 2, 1, 0])
    assert S.count_local_maxima([1, 2, 2, 1, 3]) == 2
    assert S.is_mhr([0.5, 0.25, 0.25])
    assert S.is_mhr([0.1, 0.8, 0.1])  # hazards 0.1, 8/9, 1
    assert not S.is_mhr([0.5, 0.1, 0.4])  # hazards 0.5, 0.2
    assert S.count_poly_pieces([1, 2, 3, 4, 1, 1], 1) == 2
    assert S.count_flat_pieces([1, 1, 2, 2, 1]) == 3


# --- far instances ----------------------------------------------------------------


def test_perturb_far_example():
    q = S.perturb_far_ak(uniform(4), 2, 0.5, S.Seed(0))
    assert np.allclose(sorted(q.weights), [0.125, 0.125, 0.375, 0.375])
    assert q.weights[0] == q.weights[1]
    assert ak_distance(uniform(4), q, 2).value == pytest.approx(0.5, abs=1e-12)


def test_perturb_far_small_eps_tends_to_uniform():
    q = S.perturb_far_ak(uniform(64), 8, 1e-12, S.Seed(1))
    assert np.allclose(q.weights, 1 / 64, atol=1e-13)


@pytest.mark.parametrize("seed", range(25))
def test_perturb_far_calibration(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.choice([2, 4, 8, 16]))
    n = 2 * k * int(rng.integers(1, 20))
    eps = float(rng.uniform(0.01, 1.0))
    q = S.perturb_far_ak(uniform(n), k, eps, S.Seed(seed))
    assert S.is_kflat(q, k)
    assert abs(ak_distance(uniform(n), q, k).value - eps) <= 1e-12
    assert abs(l1_distance(uniform(n), q) - eps) <= 1e-12


def test_perturb_far_errors():
    with pytest.raises(DistributionError):
        S.perturb_far_ak(uniform(10), 4, 0.5)
    with pytest.raises(DistributionError):
        S.perturb_far_ak(uniform(8), 2, 1.5)
    with pytest.raises(DistributionError):
        S.perturb_far_ak(Pmf([1, 2, 3, 4]), 2, 0.5)


def test_cancellation_instance_has_uniform_coarse_reduction():
    q = S.cancellation_instance(64, 4, 0.5, S.Seed(1))
    coarse = q.weights.reshape(4, -1).sum(axis=1)
    assert np.allclose(coarse, 0.25, atol=1e-15)
    assert l1_distance(uniform(64), q) == pytest.approx(0.5)
