"""Named numeric checks of the estimators, distances and structural inequalities.

Each check returns a plain dict with ``name``, ``count`` (instances examined),
``violations``, ``passed`` and a few check-specific metrics.  All randomness
comes from ``Seed(master_seed, (instance,))``.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .ak_tester import levels_for
from .distributions import (
    Pmf,
    RationalPmf,
    ak_distance,
    ak_distance_bruteforce,
    kolmogorov_distance,
    scale_sensitive_l2,
    uniform,
)
from .reduction import build_subdivision, pushforward
from .samplers import Seed, cancellation_instance, gen_kflat, gen_tmodal, perturb_far_ak

__all__ = ["CHECKS", "run_check", "z_fixture_pmfs"]


def _rng(master: int, *path: int) -> np.random.Generator:
    return Seed(master, path).rng()


def _result(name: str, count: int, violations: int, **metrics) -> dict:
    violations = int(violations)
    metrics = {k: float(v) if isinstance(v, np.floating) else v for k, v in metrics.items()}
    return {"name": name, "count": count, "violations": violations, "passed": violations == 0, **metrics}


def _random_rational(rng: np.random.Generator, n: int, max_denom: int, positive: bool = False) -> RationalPmf:
    lo = n if positive else 1
    denom = int(rng.integers(lo, max_denom + 1))
    if positive:
        # every point gets one unit, the rest is spread at random
        extra = rng.multinomial(denom - n, np.ones(n) / n)
        return RationalPmf((extra + 1).tolist(), denom)
    cuts = np.sort(rng.integers(0, denom + 1, size=n - 1))
    alphas = np.diff(np.concatenate([[0], cuts, [denom]]))
    return RationalPmf(alphas.tolist(), denom)


def z_fixture_pmfs() -> list:
    """Ten fixed pmfs over 16 or 64 points, from uniform to heavily skewed."""
    out = []
    for n in (16, 64):
        i = np.arange(1, n + 1, dtype=float)
        out.append(uniform(n))
        out.append(Pmf(i))
        out.append(Pmf(np.where(i <= n / 2, 3.0, 1.0)))
        out.append(Pmf(np.exp(-i / (n / 8))))
        spike = np.ones(n)
        spike[n // 3] = n / 2
        out.append(Pmf(spike))
    return out


def check_z_unbiased(master_seed: int = 0, trials: int = 10_000, m: int = 200, sigmas: float = 4.0) -> dict:
    """Mean of Z over Poissonized trials sits within ``sigmas`` standard errors of ``m^2 ||q - U||_2^2``."""
    pmfs = z_fixture_pmfs()
    worst = 0.0
    bad = 0
    details = []
    for idx, q in enumerate(pmfs):
        rng = _rng(master_seed, idx)
        n = q.n
        lam = m / n
        # independent Poisson counts are the Poissonized sample's occurrence counts
        x = rng.poisson(m * q.weights, size=(trials, n)).astype(float)
        z = ((x - lam) ** 2 - x).sum(axis=1)
        expect = m * m * math.fsum((q.weights - 1 / n) ** 2)
        se = z.std(ddof=1) / math.sqrt(trials)
        dev = abs(z.mean() - expect) / se
        worst = max(worst, dev)
        bad += dev > sigmas
        details.append({"n": n, "mean": float(z.mean()), "expected": expect, "se": float(se), "z_score": float(dev)})
    return _result("z-unbiased", len(pmfs), bad, worst_z_score=worst, pmfs=details)


def check_ak_bruteforce(master_seed: int = 0, pairs: int = 500, max_n: int = 10, max_denom: int = 64, tol: float = 1e-12) -> dict:
    """DP against exhaustive enumeration, every k, in exact and float mode."""
    bad = 0
    worst = 0.0
    evaluations = 0
    for idx in range(pairs):
        rng = _rng(master_seed, idx)
        n = int(rng.integers(2, max_n + 1))
        p = _random_rational(rng, n, max_denom)
        q = _random_rational(rng, n, max_denom)
        fp, fq = p.to_pmf(), q.to_pmf()
        for k in range(2, n + 1):
            exact = ak_distance_bruteforce(p, q, k)
            got = ak_distance(p, q, k).value
            approx = ak_distance(fp, fq, k).value
            err = abs(float(approx) - float(exact))
            worst = max(worst, err)
            bad += (got != exact) or err > tol
            evaluations += 1
    return _result("ak-bruteforce", pairs, bad, evaluations=evaluations, max_float_error=worst)


def check_a2_kolmogorov(master_seed: int = 0, pairs: int = 500, max_n: int = 64, tol: float = 1e-12) -> dict:
    """``A_2`` distance equals twice the Kolmogorov distance."""
    bad = 0
    worst = 0.0
    for idx in range(pairs):
        rng = _rng(master_seed, idx)
        n = int(rng.integers(2, max_n + 1))
        alpha = float(rng.choice([0.1, 1.0, 10.0]))
        p, q = Pmf(rng.dirichlet(np.full(n, alpha))), Pmf(rng.dirichlet(np.full(n, alpha)))
        err = abs(float(ak_distance(p, q, 2).value) - 2 * float(kolmogorov_distance(p, q)))
        worst = max(worst, err)
        bad += err > tol
    return _result("a2-kolmogorov", pairs, bad, max_error=worst)


def check_reduction_exact(master_seed: int = 0, pairs: int = 200, max_n: int = 10, max_denom: int = 64) -> dict:
    """The stretching map preserves every A_k distance exactly."""
    bad = 0
    evaluations = 0
    for idx in range(pairs):
        rng = _rng(master_seed, idx)
        n = int(rng.integers(2, max_n + 1))
        p = _random_rational(rng, n, max_denom, positive=True)
        q = _random_rational(rng, n, max_denom)
        smap = build_subdivision(p)
        q_stretched = pushforward(q, smap)
        u_N = RationalPmf([1] * smap.N, smap.N)
        for k in range(2, n + 1):
            before = ak_distance(q, p, k).value
            after = ak_distance(q_stretched, u_N, k).value
            bad += not (isinstance(before, Fraction) and before == after)
            evaluations += 1
    return _result("reduction-exact", pairs, bad, evaluations=evaluations)


def _far_instance(rng: np.random.Generator, n: int, k: int) -> Pmf:
    kind = int(rng.integers(0, 5))
    if kind == 0 and k % 2 == 0 and n % (2 * k) == 0:
        return perturb_far_ak(uniform(n), k, float(rng.uniform(0.05, 1.0)), rng)
    if kind == 1 and n % (2 * k) == 0:
        return cancellation_instance(n, k, float(rng.uniform(0.05, 1.0)), rng)
    if kind == 2:
        return gen_kflat(n, int(rng.integers(1, k + 1)), rng)
    if kind == 3:
        return gen_tmodal(n, int(rng.integers(1, 4)), rng)
    return Pmf(rng.dirichlet(np.full(n, float(rng.choice([0.2, 1.0, 5.0])))))


def check_ssl2_bound(master_seed: int = 0, instances: int = 200, max_n: int = 256, rel_tol: float = 1e-9) -> dict:
    """Scale-sensitive L2 distance dominates ``A_k^2 / (2k)^(7/8)``."""
    bad = 0
    worst = math.inf
    for idx in range(instances):
        rng = _rng(master_seed, idx)
        k = int(rng.choice([2, 4, 8, 16, 32]))
        n = k * int(rng.integers(1, max_n // k + 1))
        q = _far_instance(rng, n, k)
        ak = float(ak_distance(q, uniform(n), k).value)
        bound = ak * ak / (2 * k) ** 0.875
        ssl2 = float(scale_sensitive_l2(q, k).value)
        if bound > 0:
            worst = min(worst, ssl2 / bound)
        bad += ssl2 < bound * (1 - rel_tol)
    return _result("ssl2-bound", instances, bad, min_ratio=worst)


def check_level_l2(master_seed: int = 0, instances: int = 100, c: float = 1e-10) -> dict:
    """Some dyadic level carries reduced L2 deviation ``>= c * 2^(-j/4) * eps^2 / k``.

    ``eps`` is the instance's exact A_k distance to uniform; the reduced
    distributions come straight from interval masses, no sampling involved.
    """
    bad = 0
    worst = math.inf
    for idx in range(instances):
        rng = _rng(master_seed, idx)
        k = int(rng.choice([2, 4, 8, 16]))
        kind = idx % 3
        if kind == 0:
            eps = float(rng.uniform(0.05, 0.9))
            j0 = levels_for(min(eps, 0.99))
            n = k * 2 ** (j0 - 1) * int(rng.integers(1, 4))
            q = perturb_far_ak(uniform(n), k, eps, rng)
        elif kind == 1:
            n = k * 2 ** int(rng.integers(3, 7))
            q = cancellation_instance(n, k, float(rng.uniform(0.1, 1.0)), rng)
        else:
            n = k * 2 ** int(rng.integers(2, 6))
            q = Pmf(rng.dirichlet(np.ones(n)))
        eps = float(ak_distance(q, uniform(n), k).value)
        if eps <= 0:
            continue
        j0 = levels_for(min(eps, 0.99))
        finest = k * 2 ** (j0 - 1)
        if n % finest:
            # the finest level is all singletons once it would overshoot the domain
            j0 = int(math.log2(n // k)) + 1
            finest = k * 2 ** (j0 - 1)
        lv = q.weights.reshape(finest, -1).sum(axis=1)
        best = 0.0
        for j in reversed(range(j0)):
            ell = lv.size
            dev = math.fsum((lv - 1 / ell) ** 2)
            best = max(best, dev / (c * 2 ** (-j / 4) * eps * eps / k))
            if j:
                lv = lv.reshape(-1, 2).sum(axis=1)
        worst = min(worst, best)
        bad += best < 1
    return _result("level-l2", instances, bad, min_ratio=worst)


CHECKS = {
    "z-unbiased": check_z_unbiased,
    "ak-bruteforce": check_ak_bruteforce,
    "a2-kolmogorov": check_a2_kolmogorov,
    "reduction-exact": check_reduction_exact,
    "ssl2-bound": check_ssl2_bound,
    "level-l2": check_level_l2,
}


def run_check(name: str, master_seed: int = 0, **params) -> dict:
    if name not in CHECKS:
        raise ValueError(f"unknown check {name!r}; choose from {', '.join(sorted(CHECKS))}")
    return CHECKS[name](master_seed, **params)
