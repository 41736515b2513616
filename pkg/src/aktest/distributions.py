"""Discrete distributions over ordered domains and the distances between them.

Domain points are 1-based throughout: a pmf over ``[n]`` stores ``weights[i - 1]``
as the mass of point ``i``.  Float pmfs (:class:`Pmf`) are normalized on
construction; rational pmfs (:class:`RationalPmf`) keep integer weights over a
common denominator and every distance evaluated on two rational pmfs is exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "DistributionError",
    "DomainMismatchError",
    "Pmf",
    "RationalPmf",
    "IntervalPartition",
    "DistanceReport",
    "uniform",
    "reduce_pmf",
    "l1_distance",
    "l2_distance",
    "kolmogorov_distance",
    "ak_distance",
    "ak_distance_bruteforce",
    "scale_sensitive_l2",
    "ssl2_objective",
    "discrepancy",
    "width",
    "compensated_cumsum",
]

BRUTEFORCE_MAX_N = 16


class DistributionError(ValueError):
    """Invalid distribution, partition or distance parameters."""


class DomainMismatchError(DistributionError):
    pass


def compensated_cumsum(values) -> np.ndarray:
    """Prefix sums ``[0, v1, v1+v2, ...]`` with Neumaier compensation."""
    out = np.empty(len(values) + 1)
    out[0] = 0.0
    total = 0.0
    comp = 0.0
    for i, v in enumerate(values, start=1):
        v = float(v)
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
        out[i] = total + comp
    return out


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over ``[n]`` in double precision."""

    weights: np.ndarray

    def __init__(self, weights):
        w = np.array(weights, dtype=float).ravel()
        if w.size < 1:
            raise DistributionError("a pmf needs at least one domain point")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DistributionError("weights must be finite and non-negative")
        total = math.fsum(w)
        if total <= 0:
            raise DistributionError("weights sum to zero")
        if total != 1.0:
            w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.weights.size)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Pmf(n={self.n}, weights={np.array2string(self.weights, threshold=8)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.weights, other.weights))

    def __hash__(self) -> int:
        return hash(self.weights.tobytes())

    def mass(self, a: int, b: int) -> float:
        """Mass of the closed interval ``[a, b]``."""
        _check_interval(a, b, self.n)
        return math.fsum(self.weights[a - 1 : b])

    def cdf(self) -> np.ndarray:
        return compensated_cumsum(self.weights)[1:]

    def is_uniform(self, tol: float = 1e-15) -> bool:
        return bool(np.all(np.abs(self.weights - 1.0 / self.n) <= tol))


@dataclass(frozen=True)
class RationalPmf:
    """Pmf with point ``i`` carrying exactly ``alphas[i - 1] / denom``."""

    alphas: tuple
    denom: int

    def __init__(self, alphas: Sequence[int], denom: Optional[int] = None):
        a = tuple(int(x) for x in alphas)
        if not a:
            raise DistributionError("a pmf needs at least one domain point")
        if any(x < 0 for x in a):
            raise DistributionError("alphas must be non-negative")
        total = sum(a)
        if denom is None:
            denom = total
        if denom <= 0 or total != denom:
            raise DistributionError(f"alphas sum to {total}, expected denom {denom}")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "denom", int(denom))

    @classmethod
    def from_fractions(cls, values: Sequence) -> "RationalPmf":
        fr = [Fraction(v) for v in values]
        if sum(fr) != 1:
            raise DistributionError("fractions must sum to 1")
        den = reduce(math.lcm, (f.denominator for f in fr), 1)
        return cls([f.numerator * (den // f.denominator) for f in fr], den)

    @property
    def n(self) -> int:
        return len(self.alphas)

    def __len__(self) -> int:
        return self.n

    def fractions(self) -> list:
        return [Fraction(a, self.denom) for a in self.alphas]

    def to_pmf(self) -> Pmf:
        return Pmf(np.array(self.alphas, dtype=float) / self.denom)


AnyPmf = Union[Pmf, RationalPmf]


def uniform(n: int) -> Pmf:
    if n < 1:
        raise DistributionError("n must be positive")
    return Pmf(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class IntervalPartition:
    """Ordered partition of ``[n]`` given by cut points ``0 = b_0 < ... < b_ell = n``.

    Interval ``i`` (1-based) is ``[bounds[i-1] + 1, bounds[i]]``.
    """

    bounds: tuple

    def __init__(self, bounds: Sequence[int]):
        b = tuple(int(x) for x in bounds)
        if len(b) < 2 or b[0] != 0:
            raise DistributionError("bounds must start at 0 and contain at least one interval")
        if any(y <= x for x, y in zip(b, b[1:])):
            raise DistributionError("bounds must be strictly increasing")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def from_intervals(cls, intervals: Sequence[tuple]) -> "IntervalPartition":
        bounds = [0]
        for a, b in intervals:
            if a != bounds[-1] + 1:
                raise DistributionError("intervals must be contiguous and start at 1")
            bounds.append(b)
        return cls(bounds)

    @classmethod
    def equal(cls, n: int, ell: int) -> "IntervalPartition":
        if ell < 1 or n % ell:
            raise DistributionError(f"cannot split [{n}] into {ell} equal intervals")
        w = n // ell
        return cls(range(0, n + 1, w))

    @property
    def ell(self) -> int:
        return len(self.bounds) - 1

    @property
    def n(self) -> int:
        return self.bounds[-1]

    def intervals(self) -> list:
        return [(a + 1, b) for a, b in zip(self.bounds, self.bounds[1:])]

    def lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.bounds))

    def __len__(self) -> int:
        return self.ell


@dataclass(frozen=True)
class DistanceReport:
    value: object
    witness: Optional[IntervalPartition] = field(default=None)

    def __float__(self) -> float:
        return float(self.value)


def _check_interval(a: int, b: int, n: int) -> None:
    if not (1 <= a <= b <= n):
        raise DistributionError(f"invalid interval [{a}, {b}] for domain [{n}]")


def _check_same_domain(p: AnyPmf, q: AnyPmf) -> None:
    if p.n != q.n:
        raise DomainMismatchError(f"domain sizes differ: {p.n} vs {q.n}")


def _check_k(k: int, n: int) -> None:
    if not (2 <= k <= n):
        raise DistributionError(f"k must satisfy 2 <= k <= n, got k={k}, n={n}")


def _exact(p: AnyPmf, q: AnyPmf) -> bool:
    return isinstance(p, RationalPmf) and isinstance(q, RationalPmf)


def _integer_diff_prefix(p: RationalPmf, q: RationalPmf) -> tuple:
    """Prefix sums of ``p - q`` scaled by a common denominator, as Python ints."""
    den = math.lcm(p.denom, q.denom)
    sp, sq = den // p.denom, den // q.denom
    prefix = [0]
    for a, b in zip(p.alphas, q.alphas):
        prefix.append(prefix[-1] + a * sp - b * sq)
    return prefix, den


def _float_diff_prefix(p: AnyPmf, q: AnyPmf) -> np.ndarray:
    pw = p.to_pmf().weights if isinstance(p, RationalPmf) else p.weights
    qw = q.to_pmf().weights if isinstance(q, RationalPmf) else q.weights
    return compensated_cumsum(pw - qw)


def reduce_pmf(p: Pmf, part: IntervalPartition) -> Pmf:
    """Reduced distribution over ``[ell]``: point ``i`` carries ``p(I_i)``."""
    if part.n != p.n:
        raise DomainMismatchError(f"partition covers [{part.n}], pmf is over [{p.n}]")
    masses = [math.fsum(p.weights[a:b]) for a, b in zip(part.bounds, part.bounds[1:])]
    return Pmf(masses)


def l1_distance(p: AnyPmf, q: AnyPmf):
    _check_same_domain(p, q)
    if _exact(p, q):
        prefix, den = _integer_diff_prefix(p, q)
        return Fraction(sum(abs(y - x) for x, y in zip(prefix, prefix[1:])), den)
    return math.fsum(np.abs(_weights(p) - _weights(q)))


def l2_distance(p: AnyPmf, q: AnyPmf) -> float:
    _check_same_domain(p, q)
    d = _weights(p) - _weights(q)
    return math.sqrt(math.fsum(d * d))


def kolmogorov_distance(p: AnyPmf, q: AnyPmf):
    """Largest absolute gap between the two CDFs."""
    _check_same_domain(p, q)
    if _exact(p, q):
        prefix, den = _integer_diff_prefix(p, q)
        return Fraction(max(abs(x) for x in prefix), den)
    return float(np.max(np.abs(_float_diff_prefix(p, q))))


def _weights(p: AnyPmf) -> np.ndarray:
    return p.to_pmf().weights if isinstance(p, RationalPmf) else p.weights


def _partition_objective_from_prefix(prefix, bounds) -> object:
    return sum(abs(prefix[b] - prefix[a]) for a, b in zip(bounds, bounds[1:]))


def ak_distance(p: AnyPmf, q: AnyPmf, k: int) -> DistanceReport:
    """A_k distance: best L1 gap between reduced distributions over partitions
    of the domain into at most ``k`` intervals.

    Uses the identity ``|x| = max(x, -x)`` so that the inner maximization over the
    previous cut point collapses into two running prefix maxima, giving an
    ``O(n k)`` dynamic program over (cut position, intervals used).  Rational
    inputs are evaluated exactly and return a :class:`~fractions.Fraction`.
    """
    _check_same_domain(p, q)
    n = p.n
    _check_k(k, n)
    if _exact(p, q):
        prefix, den = _integer_diff_prefix(p, q)
        value, bounds = _ak_dp_exact(prefix, k)
        return DistanceReport(Fraction(value, den), IntervalPartition(bounds))
    prefix = _float_diff_prefix(p, q)
    value, bounds = _ak_dp_float(prefix, k)
    # re-evaluate on the witness so the reported value is reproducible from it
    value = math.fsum(abs(prefix[b] - prefix[a]) for a, b in zip(bounds, bounds[1:]))
    return DistanceReport(value, IntervalPartition(bounds))


def _ak_dp_float(prefix: np.ndarray, k: int) -> tuple:
    n = prefix.size - 1
    neg_inf = -np.inf
    # best[x]: best objective over chains 0 = b_0 < ... < b_c = x with c intervals
    best = np.full(n + 1, neg_inf)
    best[1:] = np.abs(prefix[1:] - prefix[0])
    parents = []
    best_final, best_c = best[n], 1
    layers = [best.copy()]
    for _ in range(2, k + 1):
        plus = best - prefix  # best[y] - D_y
        minus = best + prefix  # best[y] + D_y
        # strict prefix maxima over y < x
        pm_idx = _running_argmax(plus)
        mm_idx = _running_argmax(minus)
        new = np.full(n + 1, neg_inf)
        par = np.zeros(n + 1, dtype=np.int64)
        xs = np.arange(1, n + 1)
        ya = pm_idx[xs - 1]
        yb = mm_idx[xs - 1]
        va = plus[ya] + prefix[xs]
        vb = minus[yb] - prefix[xs]
        take_a = va >= vb
        new[xs] = np.where(take_a, va, vb)
        par[xs] = np.where(take_a, ya, yb)
        parents.append(par)
        best = new
        layers.append(best.copy())
        if best[n] > best_final:
            best_final, best_c = best[n], len(layers)
    bounds = [n]
    x = n
    for c in range(best_c, 1, -1):
        x = int(parents[c - 2][x])
        bounds.append(x)
    bounds.append(0)
    return float(best_final), bounds[::-1]


def _running_argmax(values: np.ndarray) -> np.ndarray:
    """Index of the first maximum of ``values[: i + 1]`` for every ``i``."""
    v = np.where(np.isnan(values), -np.inf, values)
    run = np.maximum.accumulate(v)
    is_new = np.empty(v.size, dtype=bool)
    is_new[0] = True
    is_new[1:] = v[1:] > run[:-1]
    idx = np.where(is_new, np.arange(v.size), 0)
    return np.maximum.accumulate(idx)


def _ak_dp_exact(prefix: list, k: int) -> tuple:
    n = len(prefix) - 1
    best = [None] + [abs(prefix[x] - prefix[0]) for x in range(1, n + 1)]
    parents = []
    best_final, best_c = best[n], 1
    for c in range(2, k + 1):
        new = [None] * (n + 1)
        par = [0] * (n + 1)
        pa = pb = None
        ia = ib = 0
        for x in range(1, n + 1):
            y = x - 1
            if best[y] is not None:
                a = best[y] - prefix[y]
                b = best[y] + prefix[y]
                if pa is None or a > pa:
                    pa, ia = a, y
                if pb is None or b > pb:
                    pb, ib = b, y
            if pa is None:
                continue
            va, vb = pa + prefix[x], pb - prefix[x]
            if va >= vb:
                new[x], par[x] = va, ia
            else:
                new[x], par[x] = vb, ib
        parents.append(par)
        best = new
        if best[n] is not None and best[n] > best_final:
            best_final, best_c = best[n], c
    bounds = [n]
    x = n
    for c in range(best_c, 1, -1):
        x = parents[c - 2][x]
        bounds.append(x)
    bounds.append(0)
    return best_final, bounds[::-1]


def ak_distance_bruteforce(p: AnyPmf, q: AnyPmf, k: int):
    """Exhaustive A_k distance over every partition into at most ``k`` intervals.

    Independent check for :func:`ak_distance`; refuses domains larger than 16.
    """
    _check_same_domain(p, q)
    n = p.n
    _check_k(k, n)
    if n > BRUTEFORCE_MAX_N:
        raise DistributionError(f"brute force limited to n <= {BRUTEFORCE_MAX_N}")
    if _exact(p, q):
        prefix, den = _integer_diff_prefix(p, q)
    else:
        prefix, den = list(_float_diff_prefix(p, q)), None
    best = None
    for c in range(0, k):
        for cuts in itertools.combinations(range(1, n), c):
            bounds = (0, *cuts, n)
            if den is None:
                v = math.fsum(abs(prefix[b] - prefix[a]) for a, b in zip(bounds, bounds[1:]))
            else:
                v = _partition_objective_from_prefix(prefix, bounds)
            if best is None or v > best:
                best = v
    return Fraction(best, den) if den is not None else best


def discrepancy(q: AnyPmf, interval: tuple) -> float:
    """``|q([a, b]) - (b - a + 1) / n|``: deviation of an interval from uniform mass."""
    a, b = interval
    _check_interval(a, b, q.n)
    if isinstance(q, RationalPmf):
        return abs(Fraction(sum(q.alphas[a - 1 : b]), q.denom) - Fraction(b - a + 1, q.n))
    return abs(q.mass(a, b) - (b - a + 1) / q.n)


def width(interval: tuple, n: int) -> float:
    a, b = interval
    _check_interval(a, b, n)
    return (b - a + 1) / n


def _ssl2_term(disc: float, length: int, n: int) -> float:
    return disc * disc / math.exp(math.log(length / n) / 8.0)


def ssl2_objective(q: Pmf, part: IntervalPartition) -> float:
    """Scale-sensitive objective ``sum Discr(I)^2 / width(I)^(1/8)`` of a partition."""
    if part.n != q.n:
        raise DomainMismatchError(f"partition covers [{part.n}], pmf is over [{q.n}]")
    prefix = compensated_cumsum(_weights(q))
    n = q.n
    terms = []
    for a, b in zip(part.bounds, part.bounds[1:]):
        disc = abs((prefix[b] - prefix[a]) - (b - a) / n)
        terms.append(_ssl2_term(disc, b - a, n))
    return math.fsum(terms)


def scale_sensitive_l2(q: AnyPmf, k: int) -> DistanceReport:
    """Squared scale-sensitive-L2 distance of ``q`` from the uniform distribution.

    Maximizes ``sum Discr(I)^2 / width(I)^(1/8)`` over partitions whose intervals
    hold at most ``floor(n / k)`` points.
    """
    n = q.n
    _check_k(k, n)
    cap = n // k
    prefix = compensated_cumsum(_weights(q))
    grid = np.arange(n + 1) / n
    lengths = np.arange(1, cap + 1)
    denom = np.exp(np.log(lengths / n) / 8.0)
    best = np.full(n + 1, -np.inf)
    best[0] = 0.0
    parent = np.zeros(n + 1, dtype=np.int64)
    for x in range(1, n + 1):
        lo = max(0, x - cap)
        ys = np.arange(x - 1, lo - 1, -1)  # lengths 1..x-lo
        disc = np.abs((prefix[x] - prefix[ys]) - (grid[x] - grid[ys]))
        cand = best[ys] + disc * disc / denom[: ys.size]
        j = int(np.argmax(cand))
        best[x] = cand[j]
        parent[x] = ys[j]
    bounds = [n]
    x = n
    while x > 0:
        x = int(parent[x])
        bounds.append(x)
    part = IntervalPartition(bounds[::-1])
    fq = q.to_pmf() if isinstance(q, RationalPmf) else q
    return DistanceReport(ssl2_objective(fq, part), part)
