"""Poissonized chi-square uniformity tester with an L2 guarantee.

The tester draws ``m' ~ Poi(m)`` samples, counts occurrences ``X_i`` and rejects
uniformity when ``Z = sum_i (X_i - m/n)^2 - X_i`` reaches ``4 m / sqrt(n)``.
Under Poissonization ``E[Z] = m^2 ||q - U_n||_2^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Mapping, Optional, Union

import numpy as np
from scipy import stats

from .samplers import source_counts

__all__ = [
    "Verdict",
    "TestOutcome",
    "DEFAULT_C_L2",
    "DENSE_LIMIT",
    "l2_sample_size",
    "l2_threshold",
    "z_statistic",
    "majority_repetitions",
    "majority_tail",
    "majority_verdict",
    "test_uniformity_l2",
    "test_uniformity_l2_amplified",
]

DEFAULT_C_L2 = 16.0
DENSE_LIMIT = 2**22


class Verdict(str, Enum):
    ACCEPT = "ACCEPT"
    REJECT = "REJECT"


@dataclass
class TestOutcome:
    """Verdict plus the statistic it was based on and free-form diagnostics."""

    __test__ = False

    verdict: Verdict
    statistic: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def rejected(self) -> bool:
        return self.verdict is Verdict.REJECT

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "statistic": self.statistic, **self.diagnostics}


def l2_sample_size(n: int, eps: float, c_l2: float = DEFAULT_C_L2) -> int:
    return math.ceil(c_l2 * math.sqrt(n) / eps**2)


def l2_threshold(m: float, n: int) -> float:
    return 4.0 * m / math.sqrt(n)


def z_statistic(counts: Union[np.ndarray, Mapping[int, int]], m: float, n: Optional[int] = None) -> float:
    """``sum_i (X_i - m/n)^2 - X_i``, correctly rounded for integer counts and integer ``m``.

    ``counts`` is either a dense array over ``[n]`` or a sparse mapping from
    domain point to count, in which case ``n`` is required and every untouched
    point contributes ``(m/n)^2``.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    if isinstance(counts, Mapping):
        if n is None:
            raise ValueError("sparse counts need the domain size n")
        lam = m / n
        x = np.fromiter(counts.values(), dtype=float, count=len(counts))
        untouched = n - len(counts)
        return math.fsum(np.concatenate([(x - lam) ** 2 - x, [untouched * lam * lam]]))
    x = np.asarray(counts)
    if x.size == 0:
        raise ValueError("empty count vector")
    if n is not None and n != x.size:
        raise ValueError(f"counts cover {x.size} points, expected {n}")
    lam = m / x.size
    if np.issubdtype(x.dtype, np.integer):
        # expand the square; with integer m the whole sum is an exact rational
        s1 = int(x.sum())
        s2 = int(np.dot(x.astype(np.int64), x.astype(np.int64)))
        size = x.size
        if float(m).is_integer():
            mi = int(m)
            return (size * size * s2 - (2 * mi * size + size * size) * s1 + size * mi * mi) / (size * size)
        return math.fsum([s2, -(2 * lam + 1) * s1, size * lam * lam])
    x = x.astype(float)
    return math.fsum((x - lam) ** 2 - x)


def majority_tail(r: int, p: float = 1 / 3) -> float:
    """``P[Bin(r, p) >= ceil(r / 2)]``: chance that a majority of ``r`` runs err."""
    return float(stats.binom.sf(math.ceil(r / 2) - 1, r, p))


@lru_cache(maxsize=None)
def majority_repetitions(delta: float, p: float = 1 / 3) -> int:
    """Smallest odd ``r`` whose majority vote errs with probability at most ``delta``."""
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    r = 1
    while majority_tail(r, p) > delta * (1 + 1e-12):
        r += 2
    return r


def majority_verdict(verdicts) -> Verdict:
    verdicts = list(verdicts)
    rejects = sum(v is Verdict.REJECT for v in verdicts)
    return Verdict.REJECT if 2 * rejects > len(verdicts) else Verdict.ACCEPT


def _counts_for(source, count: int, n: int):
    if n > DENSE_LIMIT and not hasattr(source, "sample_counts"):
        pts, c = np.unique(np.asarray(source.sample(count), dtype=np.int64), return_counts=True)
        return dict(zip(pts.tolist(), c.tolist()))
    return source_counts(source, count, n)


def test_uniformity_l2(
    source,
    n: int,
    eps: float,
    rng: np.random.Generator,
    *,
    c_l2: float = DEFAULT_C_L2,
    m: Optional[int] = None,
) -> TestOutcome:
    """Single Poissonized run; REJECT iff ``Z >= 4 m / sqrt(n)``.

    ``m`` overrides the nominal sample size ``ceil(c_l2 * sqrt(n) / eps^2)``.
    """
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be positive")
    m = l2_sample_size(n, eps, c_l2) if m is None else int(m)
    m_prime = int(rng.poisson(m))
    threshold = l2_threshold(m, n)
    counts = _counts_for(source, m_prime, n)
    z = z_statistic(counts, m, n)
    verdict = Verdict.REJECT if z >= threshold else Verdict.ACCEPT
    return TestOutcome(
        verdict,
        z,
        {"z": z, "m": m, "m_prime": m_prime, "threshold": threshold, "n": n, "eps": eps, "samples": m_prime},
    )


test_uniformity_l2.__test__ = False


def test_uniformity_l2_amplified(
    source,
    n: int,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    *,
    c_l2: float = DEFAULT_C_L2,
    m: Optional[int] = None,
) -> TestOutcome:
    """Majority vote over independent runs, enough of them to reach confidence ``1 - delta``."""
    r = majority_repetitions(delta)
    runs = [test_uniformity_l2(source, n, eps, rng, c_l2=c_l2, m=m) for _ in range(r)]
    verdict = majority_verdict(o.verdict for o in runs)
    rejects = sum(o.rejected for o in runs)
    first = runs[0].diagnostics
    return TestOutcome(
        verdict,
        float(rejects),
        {
            "z": [o.statistic for o in runs],
            "m": first["m"],
            "m_prime": [o.diagnostics["m_prime"] for o in runs],
            "threshold": first["threshold"],
            "repetitions": r,
            "verdicts": [o.verdict.value for o in runs],
            "samples": sum(o.diagnostics["m_prime"] for o in runs),
        },
    )


test_uniformity_l2_amplified.__test__ = False
