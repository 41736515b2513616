"""Seeded sampling and structured-distribution generators.

Randomness is pinned to numpy's ``PCG64`` bit generator seeded through
``SeedSequence(entropy=master, spawn_key=stream_path)``.  A ``(master, stream)``
pair therefore reproduces the same variates on every run and platform, and
distinct stream paths give statistically independent streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .distributions import DistributionError, Pmf, uniform

__all__ = [
    "Seed",
    "as_rng",
    "SamplerHandle",
    "PmfSource",
    "ArraySource",
    "UnderSampledError",
    "draw",
    "draw_poisson",
    "gen_uniform",
    "gen_kflat",
    "gen_tmodal",
    "gen_logconcave",
    "gen_mhr",
    "gen_piecewise_poly",
    "gen_mixture",
    "perturb_far_ak",
    "cancellation_instance",
    "count_flat_pieces",
    "count_local_maxima",
    "is_kflat",
    "is_tmodal",
    "is_logconcave",
    "is_mhr",
    "count_poly_pieces",
    "is_piecewise_poly",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Seed:
    """A master seed plus a sub-stream path, both unsigned 64-bit."""

    master: int
    stream: tuple = (0,)

    def __post_init__(self):
        stream = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        for v in (self.master, *stream):
            if not (0 <= int(v) <= _MASK64):
                raise ValueError("seed components must be unsigned 64-bit integers")
        object.__setattr__(self, "stream", tuple(int(s) for s in stream))

    def child(self, *path: int) -> "Seed":
        return Seed(self.master, self.stream + tuple(path))

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(ss))


SeedLike = Union[Seed, int, np.random.Generator, None]


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.rng()
    if seed is None:
        return np.random.default_rng()
    return Seed(int(seed)).rng()


class UnderSampledError(RuntimeError):
    """A finite sample source ran out of samples."""


class SamplerHandle:
    """Inverse-CDF sampler: a draw is a binary search in the prefix-sum table."""

    def __init__(self, pmf: Pmf):
        self.pmf = pmf
        cdf = np.cumsum(pmf.weights)
        cdf[-1] = 1.0
        # points with zero mass can never be returned by searchsorted(side="right")
        self.cdf_index = cdf

    @property
    def n(self) -> int:
        return self.pmf.n

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError("count must be non-negative")
        u = rng.random(count)
        return np.searchsorted(self.cdf_index, u, side="right").astype(np.int64) + 1

    def counts(self, rng: np.random.Generator, count: int, bins: Optional[int] = None) -> np.ndarray:
        """Occurrence counts of ``count`` iid draws, optionally pooled into equal bins.

        Distributionally identical to binning :meth:`draw` output.
        """
        w = self.pmf.weights
        if bins is not None and bins != self.n:
            if self.n % bins:
                raise ValueError(f"{bins} bins do not divide domain [{self.n}]")
            w = w.reshape(bins, -1).sum(axis=1)
        return rng.multinomial(count, w / w.sum())


def draw(handle: SamplerHandle, seed: SeedLike, count: int) -> np.ndarray:
    """``count`` iid draws (1-based points) from the handle's pmf."""
    return handle.draw(as_rng(seed), count)


def draw_poisson(lam: float, seed: SeedLike, size=None):
    """Poisson variate(s) with mean ``lam``.

    Backed by numpy's generator, which uses inversion for small means and
    transformed rejection (PTRS) otherwise.
    """
    if not lam >= 0:
        raise ValueError("Poisson mean must be non-negative")
    out = as_rng(seed).poisson(lam, size=size)
    return int(out) if size is None else out


class PmfSource:
    """Sample access to an explicitly known pmf."""

    def __init__(self, pmf: Pmf, seed: SeedLike = None):
        self.handle = SamplerHandle(pmf)
        self.rng = as_rng(seed)
        self.drawn = 0

    @property
    def pmf(self) -> Pmf:
        return self.handle.pmf

    @property
    def n(self) -> int:
        return self.handle.n

    def sample(self, count: int) -> np.ndarray:
        self.drawn += count
        return self.handle.draw(self.rng, count)

    def sample_counts(self, count: int, bins: Optional[int] = None) -> np.ndarray:
        self.drawn += count
        return self.handle.counts(self.rng, count, bins)


class ArraySource:
    """Replays a fixed list of observed samples; running out is an error."""

    def __init__(self, samples: Sequence[int], n: Optional[int] = None):
        self.samples = np.asarray(samples, dtype=np.int64)
        if self.samples.size and self.samples.min() < 1:
            raise ValueError("samples must be 1-based domain points")
        self.n = int(n) if n is not None else int(self.samples.max(initial=1))
        if self.samples.size and self.samples.max() > self.n:
            raise ValueError(f"sample outside domain [{self.n}]")
        self.pos = 0

    @property
    def drawn(self) -> int:
        return self.pos

    @property
    def remaining(self) -> int:
        return self.samples.size - self.pos

    def sample(self, count: int) -> np.ndarray:
        if count > self.remaining:
            raise UnderSampledError(
                f"requested {count} samples, only {self.remaining} of {self.samples.size} left"
            )
        out = self.samples[self.pos : self.pos + count]
        self.pos += count
        return out


def source_counts(source, count: int, n: int, bins: Optional[int] = None) -> np.ndarray:
    """Bin ``count`` samples from ``source`` over ``[n]`` into ``bins`` equal bins."""
    bins = n if bins is None else bins
    if hasattr(source, "sample_counts"):
        return np.asarray(source.sample_counts(count, bins), dtype=np.int64)
    pts = np.asarray(source.sample(count), dtype=np.int64)
    if pts.size and (pts.min() < 1 or pts.max() > n):
        raise ValueError(f"sample outside domain [{n}]")
    width = n // bins
    return np.bincount((pts - 1) // width, minlength=bins).astype(np.int64)


# --------------------------------------------------------------------------
# generators


def gen_uniform(n: int, seed: SeedLike = None) -> Pmf:
    return uniform(n)


def _random_cuts(rng: np.random.Generator, n: int, pieces: int) -> np.ndarray:
    """Bounds ``0 = b_0 < ... < b_pieces = n`` with uniformly random interior cuts."""
    inner = np.sort(rng.choice(np.arange(1, n), size=pieces - 1, replace=False)) if pieces > 1 else []
    return np.concatenate([[0], inner, [n]]).astype(np.int64)


def gen_kflat(n: int, k: int, seed: SeedLike = None) -> Pmf:
    """Piecewise-constant pmf with ``k`` random contiguous pieces."""
    if not (1 <= k <= n):
        raise DistributionError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = as_rng(seed)
    bounds = _random_cuts(rng, n, k)
    levels = rng.uniform(0.1, 1.0, size=k)
    w = np.repeat(levels, np.diff(bounds))
    return Pmf(w)


def _unimodal_segment(rng: np.random.Generator, length: int) -> np.ndarray:
    mode = int(rng.integers(0, length))
    up = np.cumsum(rng.uniform(0.05, 1.0, size=mode + 1))
    down = up[-1] - np.cumsum(rng.uniform(0.05, 1.0, size=length - mode - 1))
    seg = np.concatenate([up, down])
    return seg - min(seg.min(), 0.0) + rng.uniform(0.5, 2.0)


def gen_tmodal(n: int, t: int, seed: SeedLike = None) -> Pmf:
    """Pmf with at most ``t`` local maxima: ``t`` strictly unimodal segments glued together."""
    if t < 1 or t > n:
        raise DistributionError(f"need 1 <= t <= n, got t={t}, n={n}")
    rng = as_rng(seed)
    bounds = _random_cuts(rng, n, t)
    w = np.concatenate([_unimodal_segment(rng, int(b - a)) for a, b in zip(bounds, bounds[1:])])
    return Pmf(w)


def gen_logconcave(n: int, seed: SeedLike = None) -> Pmf:
    """Discretized Gaussian with random location and scale."""
    if n < 1:
        raise DistributionError("n must be positive")
    rng = as_rng(seed)
    mu = rng.uniform(1, n)
    sigma = rng.uniform(max(n / 50, 0.5), max(n / 4, 1.0))
    x = np.arange(1, n + 1)
    logw = -((x - mu) ** 2) / (2 * sigma**2)
    logw -= logw.max()
    # drop the far tails before they reach subnormal range; the support stays an interval
    w = np.where(logw > -600.0, np.exp(logw), 0.0)
    return Pmf(w)


def gen_mhr(n: int, seed: SeedLike = None) -> Pmf:
    """Pmf built from a random non-decreasing hazard sequence ending in 1."""
    if n < 1:
        raise DistributionError("n must be positive")
    rng = as_rng(seed)
    scale = rng.uniform(0.5, 6.0) / n
    h = np.sort(rng.uniform(0.01 * scale, scale, size=n))
    h[-1] = 1.0
    survival = np.concatenate([[1.0], np.cumprod(1.0 - h[:-1])])
    return Pmf(h * survival)


def gen_piecewise_poly(n: int, t: int, d: int, seed: SeedLike = None) -> Pmf:
    """``t`` pieces, each a degree-``d`` polynomial with positive Bernstein coefficients."""
    if t < 1 or t > n or d < 0:
        raise DistributionError(f"invalid piecewise-poly parameters t={t}, d={d}, n={n}")
    rng = as_rng(seed)
    bounds = _random_cuts(rng, n, t)
    parts = []
    for a, b in zip(bounds, bounds[1:]):
        length = int(b - a)
        coef = rng.uniform(0.1, 1.0, size=d + 1)
        u = (np.arange(length) + 0.5) / length
        vals = sum(
            c * math.comb(d, i) * u**i * (1 - u) ** (d - i) for i, c in enumerate(coef)
        )
        parts.append(np.asarray(vals, dtype=float) * np.ones(length))
    return Pmf(np.concatenate(parts))


def gen_mixture(components: Sequence[Union[Pmf, Callable]], weights: Sequence[float], seed: SeedLike = None) -> Pmf:
    """Convex combination of component pmfs.

    Components may be pmfs or callables ``f(rng) -> Pmf``; callables receive
    independent child streams of ``seed``.
    """
    w = np.asarray(weights, dtype=float)
    if len(components) == 0 or len(components) != w.size:
        raise DistributionError("need one weight per component")
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-9:
        raise DistributionError("mixture weights must be non-negative and sum to 1")
    base = seed if isinstance(seed, Seed) else Seed(int(as_rng(seed).integers(0, 2**63)))
    pmfs = [c(base.child(i).rng()) if callable(c) else c for i, c in enumerate(components)]
    n = pmfs[0].n
    if any(p.n != n for p in pmfs):
        raise DistributionError("mixture components must share a domain")
    return Pmf(sum(wi * p.weights for wi, p in zip(w, pmfs)))


def perturb_far_ak(p: Pmf, k: int, eps: float, seed: SeedLike = None) -> Pmf:
    """k-flat pmf at A_k (and L1) distance exactly ``eps`` from the uniform ``p``.

    The domain is cut into ``k`` equal intervals taken in adjacent pairs; within
    each pair one interval gets mass ``(1 + eps)/k`` and the other ``(1 - eps)/k``,
    the order chosen by a fair coin.
    """
    n = p.n
    if not p.is_uniform():
        raise DistributionError("perturb_far_ak supports only a uniform base pmf")
    if k < 2 or k % 2 or n % (2 * k):
        raise DistributionError(f"need even k >= 2 with 2k dividing n, got k={k}, n={n}")
    if not (0 < eps <= 1):
        raise DistributionError("eps must lie in (0, 1]")
    rng = as_rng(seed)
    signs = np.where(rng.random(k // 2) < 0.5, 1.0, -1.0)
    per_interval = np.empty(k)
    per_interval[0::2] = 1.0 + eps * signs
    per_interval[1::2] = 1.0 - eps * signs
    w = np.repeat(per_interval / n, n // k)
    return Pmf(w)


def cancellation_instance(n: int, k: int, amplitude: float, seed: SeedLike = None) -> Pmf:
    """Uniform plus a +/- pattern that cancels inside each of ``k`` equal intervals.

    Every interval ``[(i-1)n/k + 1, i n/k]`` is split in halves carrying
    ``(1 + s*amplitude)/n`` and ``(1 - s*amplitude)/n`` per point with a random
    sign ``s``, so the reduced distribution over the ``k`` intervals is exactly
    uniform while the pmf itself is far from uniform.
    """
    if n % (2 * k):
        raise DistributionError("need 2k to divide n")
    if not (0 < amplitude <= 1):
        raise DistributionError("amplitude must lie in (0, 1]")
    rng = as_rng(seed)
    signs = np.where(rng.random(k) < 0.5, 1.0, -1.0)
    half = n // (2 * k)
    per_half = np.empty(2 * k)
    per_half[0::2] = 1.0 + amplitude * signs
    per_half[1::2] = 1.0 - amplitude * signs
    return Pmf(np.repeat(per_half / n, half))


# --------------------------------------------------------------------------
# class predicates


def count_flat_pieces(w) -> int:
    w = np.asarray(getattr(w, "weights", w))
    return int(1 + np.count_nonzero(w[1:] != w[:-1]))


def is_kflat(w, k: int) -> bool:
    return count_flat_pieces(w) <= k


def count_local_maxima(w) -> int:
    """Number of plateaus strictly above both neighbours (domain ends count as -inf)."""
    w = np.asarray(getattr(w, "weights", w))
    runs = w[np.concatenate([[True], w[1:] != w[:-1]])]
    padded = np.concatenate([[-np.inf], runs, [-np.inf]])
    return int(np.count_nonzero((padded[1:-1] > padded[:-2]) & (padded[1:-1] > padded[2:])))


def is_tmodal(w, t: int) -> bool:
    return count_local_maxima(w) <= t


def _support(w: np.ndarray) -> tuple:
    nz = np.flatnonzero(w > 0)
    return int(nz[0]), int(nz[-1])


def is_logconcave(w, rel_tol: float = 1e-12) -> bool:
    """Support is an interval and ``w_i^2 >= w_{i-1} w_{i+1}`` on it."""
    w = np.asarray(getattr(w, "weights", w), dtype=float)
    lo, hi = _support(w)
    s = w[lo : hi + 1]
    if np.any(s <= 0):
        return False
    if s.size < 3:
        return True
    lhs = s[1:-1] ** 2
    rhs = s[:-2] * s[2:]
    return bool(np.all(lhs >= rhs * (1 - rel_tol)))


def hazard_rates(w) -> np.ndarray:
    w = np.asarray(getattr(w, "weights", w), dtype=float)
    tail = np.cumsum(w[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(tail > 0, w / tail, np.nan)


def is_mhr(w, slack: float = 1e-12) -> bool:
    """Hazard ``w_i / sum_{j >= i} w_j`` is non-decreasing on the support."""
    w = np.asarray(getattr(w, "weights", w), dtype=float)
    lo, hi = _support(w)
    h = hazard_rates(w)[lo : hi + 1]
    return bool(np.all(np.diff(h) >= -slack))


def count_poly_pieces(w, d: int, rel_tol: float = 1e-9) -> int:
    """Fewest contiguous pieces on which ``w`` is a degree-``d`` polynomial.

    Greedy maximal extension is optimal because any sub-run of a polynomial run
    is itself polynomial.  Checking only the newest finite difference while
    extending is enough: earlier ones were checked when their points were added.
    """
    w = np.asarray(getattr(w, "weights", w), dtype=float)
    tol = rel_tol * float(np.max(np.abs(w))) * 2 ** (d + 1)
    pieces = 1
    start = 0
    for end in range(1, w.size):
        seg = w[start : end + 1]
        if seg.size > d + 1 and abs(np.diff(seg[-(d + 2):], n=d + 1)[0]) > tol:
            pieces += 1
            start = end
    return pieces


def is_piecewise_poly(w, t: int, d: int) -> bool:
    return count_poly_pieces(w, d) <= t
