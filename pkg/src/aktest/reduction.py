"""Reduction from identity testing against an explicit pmf to uniformity testing.

Point ``i`` of the original domain, carrying ``alpha_i / N`` under the explicit
pmf ``p``, is stretched into a block of ``alpha_i`` consecutive points of ``[N]``.
Under this map ``p`` becomes uniform on ``[N]``, an unknown ``q`` becomes the
pushforward ``q'`` that spreads ``q_i`` evenly over block ``i``, and A_k distances
are unchanged.  A further factor-``s`` subdivision makes the stretched size
divisible by whatever the dyadic partitions need.  Stretched domains are never
materialized: points are located by arithmetic on block offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .distributions import DistributionError, Pmf, RationalPmf, compensated_cumsum
from .samplers import SeedLike, as_rng

__all__ = [
    "SupportViolation",
    "SubdivisionMap",
    "build_subdivision",
    "default_precision",
    "rationalize",
    "transform_sample",
    "transform_samples",
    "stretch_to_divisible",
    "pushforward",
    "stretched_bin_masses",
    "StretchedSource",
]


class SupportViolation(Exception):
    """A sample landed on a point the explicit pmf gives zero mass."""

    def __init__(self, point: int):
        super().__init__(f"sample on point {point}, which has zero mass under p")
        self.point = point


@dataclass(frozen=True)
class SubdivisionMap:
    alphas: tuple
    offsets: tuple  # offsets[i] = alpha_1 + ... + alpha_i, offsets[0] = 0
    N: int

    @property
    def n(self) -> int:
        return len(self.alphas)

    def block(self, i: int) -> tuple:
        """Closed block ``[first, last]`` of stretched points for original point ``i``;
        empty blocks come back with ``first > last``."""
        return self.offsets[i - 1] + 1, self.offsets[i]


def build_subdivision(p: RationalPmf) -> SubdivisionMap:
    offsets = [0]
    for a in p.alphas:
        offsets.append(offsets[-1] + a)
    return SubdivisionMap(tuple(p.alphas), tuple(offsets), p.denom)


_INT64_HEADROOM = 2**62


def default_precision(n: int, eps: float, modulus: int = 1) -> int:
    """Power-of-two denominator with rounding error ``n / N <= 2^-20 * eps``.

    The tester's huge default sample sizes see even tiny systematic rounding
    bias, so the margin is generous.  ``N * modulus`` is kept inside int64.
    """
    target = max(2**16, math.ceil(2**20 * n / eps))
    N = 1 << (target - 1).bit_length()
    while N > n and N * modulus > _INT64_HEADROOM:
        N //= 2
    return N


def rationalize(p: Pmf, precision: int) -> RationalPmf:
    """Approximate ``p`` by ``alpha / N`` with ``N = precision`` (largest remainder).

    Points with positive mass keep ``alpha_i >= 1`` so that the support of the
    approximation equals the support of ``p``.
    """
    N = int(precision)
    if N < 1:
        raise DistributionError("precision must be a positive integer")
    w = p.weights
    if np.count_nonzero(w) > N:
        raise DistributionError(f"precision {N} is below the support size {np.count_nonzero(w)}")
    target = w * N
    alphas = np.floor(target).astype(np.int64)
    short = N - int(alphas.sum())
    if short > 0:
        order = np.argsort(-(target - alphas), kind="stable")
        alphas[order[:short]] += 1
    elif short < 0:  # floating slack in w * N can overshoot by a unit or two
        order = np.argsort(target - alphas, kind="stable")
        for i in order:
            if short == 0:
                break
            if alphas[i] > 0:
                alphas[i] -= 1
                short += 1
    for i in np.flatnonzero((alphas == 0) & (w > 0)):
        excess = np.where(alphas >= 2, alphas - target, -np.inf)
        j = int(np.argmax(excess))
        alphas[j] -= 1
        alphas[i] = 1
    return RationalPmf(alphas.tolist(), N)


def stretch_to_divisible(N: int, modulus: int) -> tuple:
    """Smallest factor ``s`` with ``modulus | N * s``; returns ``(s, N * s)``."""
    if modulus < 1:
        raise ValueError("modulus must be positive")
    s = modulus // math.gcd(N, modulus)
    return s, N * s


def transform_sample(smap: SubdivisionMap, i: int, seed: SeedLike = None, stretch: int = 1) -> int:
    """Uniform stretched point inside block ``i`` (then inside its factor-``stretch`` sub-block)."""
    return int(transform_samples(smap, np.array([i]), as_rng(seed), stretch)[0])


def transform_samples(smap: SubdivisionMap, points, rng: np.random.Generator, stretch: int = 1) -> np.ndarray:
    points = np.asarray(points, dtype=np.int64)
    alphas = np.asarray(smap.alphas, dtype=np.int64)
    offsets = np.asarray(smap.offsets, dtype=np.int64)
    a = alphas[points - 1]
    bad = np.flatnonzero(a == 0)
    if bad.size:
        raise SupportViolation(int(points[bad[0]]))
    # uniform over the a*stretch stretched points of the block
    span = a * stretch
    u = np.floor(rng.random(points.size) * span).astype(np.int64)
    u = np.minimum(u, span - 1)
    return offsets[points - 1] * stretch + u + 1


def pushforward(q, smap: SubdivisionMap, stretch: int = 1):
    """Exact pushforward of ``q`` onto ``[N * stretch]``; mass on p-null points is dropped.

    Rational ``q`` gives a :class:`RationalPmf`, float ``q`` a :class:`Pmf`.
    """
    if q.n != smap.n:
        raise DistributionError("q and the subdivision map have different domains")
    if isinstance(q, RationalPmf):
        vals = []
        for b, a in zip(q.alphas, smap.alphas):
            if a == 0:
                continue
            vals.extend([Fraction(b, q.denom * a * stretch)] * (a * stretch))
        total = sum(vals)
        if total != 1:
            raise DistributionError("q has mass outside the support of p")
        return RationalPmf.from_fractions(vals)
    reps = np.asarray(smap.alphas) * stretch
    with np.errstate(divide="ignore", invalid="ignore"):
        per_point = np.where(reps > 0, q.weights / np.maximum(reps, 1), 0.0)
    return Pmf(np.repeat(per_point, reps))


def stretched_bin_masses(q: Pmf, smap: SubdivisionMap, stretch: int, bins: int) -> tuple:
    """Masses of the pushforward of ``q`` on ``bins`` equal intervals of ``[N * stretch]``.

    Returns ``(masses, violation)`` where ``violation`` is the mass ``q`` puts on
    points with ``alpha_i = 0``.
    """
    total = smap.N * stretch
    if total % bins:
        raise DistributionError(f"{bins} bins do not divide the stretched domain [{total}]")
    alphas = np.asarray(smap.alphas, dtype=np.int64)
    offsets = np.asarray(smap.offsets, dtype=np.int64) * stretch
    w = q.weights
    live = alphas > 0
    violation = math.fsum(w[~live])
    cum = compensated_cumsum(np.where(live, w, 0.0))
    edges = np.arange(bins + 1, dtype=np.int64) * (total // bins)
    # block containing the stretched prefix [1, e]: last i with offsets[i-1] < e
    blk = np.searchsorted(offsets[1:], edges, side="left")
    blk = np.minimum(blk, smap.n - 1)
    span = alphas[blk] * stretch
    frac = np.where(span > 0, (edges - offsets[blk]) / np.maximum(span, 1), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    F = cum[blk] + w[blk] * np.where(live[blk], frac, 0.0)
    F[0] = 0.0
    F[-1] = cum[-1]
    masses = np.maximum(np.diff(F), 0.0)
    return masses, violation


class StretchedSource:
    """Sample access to the pushforward ``q'`` built from sample access to ``q``."""

    def __init__(self, q_source, smap: SubdivisionMap, stretch: int, seed: SeedLike = None):
        self.q_source = q_source
        self.smap = smap
        self.stretch = stretch
        self.rng = as_rng(seed)
        self._bin_cache: dict = {}

    @property
    def n(self) -> int:
        return self.smap.N * self.stretch

    @property
    def drawn(self) -> int:
        return self.q_source.drawn

    def sample(self, count: int) -> np.ndarray:
        pts = self.q_source.sample(count)
        return transform_samples(self.smap, pts, self.rng, self.stretch)

    def sample_counts(self, count: int, bins: Optional[int] = None) -> np.ndarray:
        bins = self.n if bins is None else bins
        pmf = getattr(self.q_source, "pmf", None)
        if pmf is None:
            pts = self.sample(count)
            return np.bincount((pts - 1) // (self.n // bins), minlength=bins)
        if bins not in self._bin_cache:
            masses, violation = stretched_bin_masses(pmf, self.smap, self.stretch, bins)
            probs = np.append(masses, violation)
            self._bin_cache[bins] = probs / probs.sum()
        self.q_source.drawn += count
        counts = self.q_source.rng.multinomial(count, self._bin_cache[bins])
        if counts[-1]:
            null = np.flatnonzero((np.asarray(self.smap.alphas) == 0) & (pmf.weights > 0))
            raise SupportViolation(int(null[0]) + 1)
        return counts[:-1]

