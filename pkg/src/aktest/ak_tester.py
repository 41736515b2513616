"""Multi-scale A_k uniformity tester and the identity tester built on it.

The uniformity tester looks at ``j0`` dyadic partitions of the domain, level
``j`` cutting it into ``k * 2^j`` equal intervals.  One sample set feeds every
level; each level runs the Poissonized L2 tester on its reduced counts with
radius ``eps_j = C * eps * 2^(3j/8)`` and confidence ``1 - 2^-j / 6``, and the
overall verdict is REJECT as soon as any level rejects.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .distributions import DistributionError, IntervalPartition, Pmf, RationalPmf
from .l2 import (
    DEFAULT_C_L2,
    TestOutcome,
    Verdict,
    l2_threshold,
    majority_repetitions,
    majority_verdict,
    z_statistic,
)
from .reduction import (
    StretchedSource,
    SupportViolation,
    build_subdivision,
    default_precision,
    rationalize,
    stretch_to_divisible,
)
from .samplers import source_counts

__all__ = [
    "DivisibilityError",
    "TesterConstants",
    "STRICT_CONSTANTS",
    "STRICT_NORMALIZED_CONSTANTS",
    "CONSTANT_PRESETS",
    "DyadicFamily",
    "LevelSchedule",
    "levels_for",
    "build_dyadic_family",
    "build_schedule",
    "bin_samples",
    "aggregate_levels",
    "test_uniformity_ak",
    "test_identity_ak",
    "ClassDescriptor",
    "parse_class",
    "preset_k",
]


class DivisibilityError(DistributionError):
    """Domain size not divisible by the finest dyadic level; stretch the domain first."""


@dataclass(frozen=True)
class TesterConstants:
    """Tuning constants of the A_k tester.

    ``C`` scales the per-level radii; ``c_l2`` is the L2 tester's sample constant;
    ``c_ak`` sets the shared sample size ``m = c_ak * sqrt(k) / eps^2``.  The
    default ``c_ak`` is ``c_l2 / C^2 / 0.8`` so the coarsest level asks for 80% of
    the shared sample.
    """

    c_l2: float = DEFAULT_C_L2
    c_ak: float = DEFAULT_C_L2 * 80**2 / 0.8
    C: float = 1 / 80
    j0_slack: int = 2
    c_lc: float = 1.0
    c_tm: float = 1.0
    c_mh: float = 1.0

    def with_overrides(self, **kw) -> "TesterConstants":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def as_dict(self) -> dict:
        return asdict(self)


# Radius constants backed by the general-case structural argument; the
# second matches the normalized-domain schedule.  Sample sizes explode.
STRICT_CONSTANTS = TesterConstants(C=5e-6, c_ak=DEFAULT_C_L2 / 5e-6**2 / 0.8)
STRICT_NORMALIZED_CONSTANTS = TesterConstants(C=1e-5, c_ak=DEFAULT_C_L2 / 1e-5**2 / 0.8)
CONSTANT_PRESETS = {
    "default": TesterConstants(),
    "strict": STRICT_CONSTANTS,
    "strict-normalized": STRICT_NORMALIZED_CONSTANTS,
}


def levels_for(eps: float, j0_slack: int = 2) -> int:
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    return math.ceil(math.log2(1 / eps)) + j0_slack


@dataclass(frozen=True)
class DyadicFamily:
    domain_size: int
    k: int
    j0: int

    def __post_init__(self):
        if not (2 <= self.k <= self.domain_size):
            raise DistributionError(f"need 2 <= k <= domain size, got k={self.k}")
        if self.j0 < 1:
            raise ValueError("need at least one level")
        if self.domain_size % self.finest:
            raise DivisibilityError(
                f"domain size {self.domain_size} is not a multiple of k*2^(j0-1) = {self.finest}; "
                "stretch the domain first"
            )

    @property
    def finest(self) -> int:
        return self.k * 2 ** (self.j0 - 1)

    @property
    def ells(self) -> list:
        return [self.k * 2**j for j in range(self.j0)]

    def interval(self, j: int, i: int) -> tuple:
        """Closed bounds of the ``i``-th (1-based) interval at level ``j``."""
        ell = self.k * 2**j
        if not (0 <= j < self.j0 and 1 <= i <= ell):
            raise IndexError(f"no interval {i} at level {j}")
        w = self.domain_size // ell
        return (i - 1) * w + 1, i * w

    def partition(self, j: int) -> IntervalPartition:
        return IntervalPartition.equal(self.domain_size, self.k * 2**j)


def build_dyadic_family(domain_size: int, k: int, eps: float, j0_slack: int = 2) -> DyadicFamily:
    return DyadicFamily(domain_size, k, levels_for(eps, j0_slack))


@dataclass
class LevelSchedule:
    k: int
    eps: float
    m: int
    ells: list
    eps_j: list
    delta_j: list
    gamma_sq_j: list
    m_j: list
    reps_j: list
    active: list

    @property
    def j0(self) -> int:
        return len(self.ells)


def build_schedule(
    k: int, eps: float, constants: TesterConstants = TesterConstants(), m: Optional[int] = None
) -> LevelSchedule:
    """Per-level radii, confidences and Poisson means.

    An explicit ``m`` rescales every per-level mean by ``m / m_default``, which is
    the same as solving for the radius constant that fits the given budget.
    """
    j0 = levels_for(eps, constants.j0_slack)
    m_default = math.ceil(constants.c_ak * math.sqrt(k) / eps**2)
    m = m_default if m is None else int(m)
    if m < 1:
        raise ValueError("sample budget must be positive")
    scale = m / m_default
    ells, eps_j, delta_j, gamma_sq, m_j, reps, active = [], [], [], [], [], [], []
    for j in range(j0):
        ell = k * 2**j
        e = constants.C * eps * 2 ** (3 * j / 8)
        ells.append(ell)
        eps_j.append(e)
        delta_j.append(2.0**-j / 6)
        gamma_sq.append(e * e / ell)
        m_j.append(max(1, math.ceil(constants.c_l2 * math.sqrt(ell) / e**2 * scale)))
        reps.append(majority_repetitions(2.0**-j / 6))
        active.append(e < 1)
    return LevelSchedule(k, eps, m, ells, eps_j, delta_j, gamma_sq, m_j, reps, active)


def aggregate_levels(finest_counts: np.ndarray, j0: int) -> list:
    """Per-level counts from finest-level counts by summing sibling pairs."""
    levels = [np.asarray(finest_counts, dtype=np.int64)]
    for _ in range(j0 - 1):
        levels.append(levels[-1].reshape(-1, 2).sum(axis=1))
    return levels[::-1]


def bin_samples(family: DyadicFamily, samples) -> list:
    """Counts per level (coarsest first) for stretched-domain samples."""
    x = np.asarray(samples, dtype=np.int64)
    if x.size and (x.min() < 1 or x.max() > family.domain_size):
        raise ValueError(f"sample outside domain [{family.domain_size}]")
    width = family.domain_size // family.finest
    finest = np.bincount((x - 1) // width, minlength=family.finest)
    return aggregate_levels(finest, family.j0)


def test_uniformity_ak(
    source,
    domain_size: int,
    k: int,
    eps: float,
    rng: np.random.Generator,
    *,
    constants: TesterConstants = TesterConstants(),
    m: Optional[int] = None,
) -> TestOutcome:
    """Test ``q = U`` against ``||q - U||_{A_k} >= eps`` over ``[domain_size]``.

    Draws one sample set ``S`` of size ``m`` and bins it at the finest level.
    Every repetition at level ``j`` takes ``m'_j ~ Poi(m_j)`` points of ``S``
    without replacement (a uniformly random subset of an iid sample is again
    iid, so each repetition is an exactly Poissonized run) and applies the
    L2 rule at threshold ``4 m_j / sqrt(ell_j)``.
    """
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    sched = build_schedule(k, eps, constants, m)
    family = DyadicFamily(domain_size, k, sched.j0)
    finest = source_counts(source, sched.m, domain_size, family.finest)
    levels = aggregate_levels(finest, family.j0)
    total = int(finest.sum())
    per_level = []
    under_sampled = False
    any_reject = False
    for j, counts in enumerate(levels):
        info = {
            "j": j,
            "ell_j": sched.ells[j],
            "eps_j": sched.eps_j[j],
            "delta_j": sched.delta_j[j],
            "m_j": sched.m_j[j],
            "threshold": l2_threshold(sched.m_j[j], sched.ells[j]),
            "repetitions": sched.reps_j[j],
        }
        if not sched.active[j]:
            info.update(verdict="SKIPPED", z=[])
            per_level.append(info)
            continue
        zs, verdicts = [], []
        for _ in range(sched.reps_j[j]):
            mp = int(rng.poisson(sched.m_j[j]))
            if mp >= total:
                under_sampled |= mp > total
                sub = counts
            else:
                # "count" is much faster when the sample is sparse over the bins
                method = "count" if total <= 32 * counts.size else "marginals"
                sub = rng.multivariate_hypergeometric(counts, mp, method=method)
            z = z_statistic(sub, sched.m_j[j])
            zs.append(z)
            verdicts.append(Verdict.REJECT if z >= info["threshold"] else Verdict.ACCEPT)
        level_verdict = majority_verdict(verdicts)
        any_reject |= level_verdict is Verdict.REJECT
        info.update(verdict=level_verdict.value, z=zs, rejects=sum(v is Verdict.REJECT for v in verdicts))
        per_level.append(info)
    verdict = Verdict.REJECT if any_reject else Verdict.ACCEPT
    n_rej = sum(1 for lv in per_level if lv["verdict"] == "REJECT")
    return TestOutcome(
        verdict,
        float(n_rej),
        {
            "m": sched.m,
            "samples": total,
            "domain_size": domain_size,
            "k": k,
            "eps": eps,
            "j0": sched.j0,
            "under_sampled": under_sampled,
            "levels": per_level,
        },
    )


test_uniformity_ak.__test__ = False


def test_identity_ak(
    q_source,
    p: Union[Pmf, RationalPmf],
    k: int,
    eps: float,
    rng: np.random.Generator,
    *,
    delta: float = 1 / 3,
    constants: TesterConstants = TesterConstants(),
    precision: Optional[int] = None,
    m: Optional[int] = None,
) -> TestOutcome:
    """Test ``q = p`` against ``||q - p||_{A_k} >= eps`` for an explicit ``p``.

    ``p`` is rationalized (unless already rational), stretched to the uniform
    distribution on ``[N]``, stretched again so the dyadic levels divide the
    domain, and the A_k uniformity tester runs on the transformed samples.  A
    sample on a point where ``p`` is zero rejects at once.
    """
    n = p.n
    if not (2 <= k <= n):
        raise DistributionError(f"need 2 <= k <= n, got k={k}, n={n}")
    j0 = levels_for(eps, constants.j0_slack)
    modulus = k * 2 ** (j0 - 1)
    if isinstance(p, RationalPmf):
        p_rat = p
    else:
        p_rat = rationalize(p, precision or default_precision(n, eps, modulus))
    smap = build_subdivision(p_rat)
    stretch, domain = stretch_to_divisible(smap.N, modulus)
    source = StretchedSource(q_source, smap, stretch, rng)
    reps = majority_repetitions(delta) if delta < 1 / 3 else 1
    runs = []
    meta = {"N": smap.N, "stretch": stretch, "domain_size": domain, "k": k, "eps": eps, "repetitions": reps}
    for _ in range(reps):
        try:
            runs.append(test_uniformity_ak(source, domain, k, eps, rng, constants=constants, m=m))
        except SupportViolation as exc:
            return TestOutcome(
                Verdict.REJECT,
                math.inf,
                {**meta, "reason": "support-violation", "point": exc.point, "samples": q_source.drawn},
            )
    verdict = majority_verdict(o.verdict for o in runs)
    diag = {**meta, "samples": sum(o.diagnostics["samples"] for o in runs), "runs": [o.diagnostics for o in runs]}
    if reps == 1:
        diag.update(levels=runs[0].diagnostics["levels"], m=runs[0].diagnostics["m"])
    return TestOutcome(verdict, float(sum(o.rejected for o in runs)), diag)


test_identity_ak.__test__ = False


# --------------------------------------------------------------------------
# class presets

_CLASS_ARITY = {
    "t-flat": 1,
    "piecewise-poly": 2,
    "log-concave": 0,
    "mixture-log-concave": 1,
    "t-modal": 1,
    "mixture-t-modal": 2,
    "mhr": 0,
    "mixture-mhr": 1,
}


@dataclass(frozen=True)
class ClassDescriptor:
    name: str
    params: tuple = field(default=())

    def __str__(self) -> str:
        return self.name + (":" + ",".join(map(str, self.params)) if self.params else "")


def parse_class(text: Union[str, ClassDescriptor]) -> ClassDescriptor:
    """Parse ``name[:p1,p2]``, e.g. ``t-flat:5``, ``piecewise-poly:3,2``, ``mhr``."""
    if isinstance(text, ClassDescriptor):
        desc = text
    else:
        m = re.fullmatch(r"\s*([a-z-]+)\s*(?::\s*([0-9,\s]+))?\s*", str(text))
        if not m:
            raise ValueError(f"cannot parse class descriptor {text!r}")
        params = tuple(int(x) for x in m.group(2).split(",")) if m.group(2) else ()
        desc = ClassDescriptor(m.group(1), params)
    if desc.name not in _CLASS_ARITY:
        raise ValueError(f"unknown distribution class {desc.name!r}")
    if len(desc.params) != _CLASS_ARITY[desc.name]:
        raise ValueError(f"class {desc.name} takes {_CLASS_ARITY[desc.name]} parameter(s)")
    # every parameter counts pieces or components except the polynomial degree
    floors = [1] * len(desc.params)
    if desc.name == "piecewise-poly":
        floors[1] = 0
    if any(v < lo for v, lo in zip(desc.params, floors)):
        raise ValueError(f"invalid parameters for {desc}")
    return desc


def preset_k(descriptor, n: int, eps: float, constants: TesterConstants = TesterConstants()) -> int:
    """Number of intervals ``k`` at which the class's L1 and A_k distances agree.

    Results are clamped to ``[2, n]``: at ``k = n`` the A_k distance is the L1 distance.
    """
    d = parse_class(descriptor)
    name, pr = d.name, d.params
    if name == "t-flat":
        k = 2 * pr[0]
    elif name == "piecewise-poly":
        k = 2 * pr[0] * (pr[1] + 1)
    elif name in ("log-concave", "mixture-log-concave"):
        k = math.ceil(constants.c_lc * eps**-0.5 * math.log2(2 / eps))
        if name.startswith("mixture"):
            k *= pr[0]
    elif name in ("t-modal", "mixture-t-modal"):
        t = pr[-1]
        k = math.ceil(constants.c_tm * t * math.log2(n) / eps)
        if name.startswith("mixture"):
            k *= pr[0]
    else:
        k = math.ceil(constants.c_mh * math.log2(n / eps) / eps)
        if name.startswith("mixture"):
            k *= pr[0]
    return int(min(max(k, 2), n))
