"""Sequence and distribution statistics: monotone subsequences, records,
empirical CDFs, KS distances, spacings, Poisson tails and the height constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .bst import PointSet

__all__ = [
    "lis",
    "lds",
    "records",
    "c_star",
    "C_STAR",
    "empirical_cdf",
    "ks_distance",
    "ks_two_sample",
    "poisson_tail_upper",
    "poisson_tail_lower",
    "GapStats",
    "gap_stats",
    "SummaryTable",
    "summarize",
    "expected_increasing_subsequences",
]


def _as_float(seq) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(seq, dtype=float).ravel())


def lis(seq) -> int:
    """Length of the longest increasing subsequence (patience sorting)."""
    a = _as_float(seq)
    return int(_kernels.lis_length(a)) if len(a) else 0


def lds(seq) -> int:
    a = _as_float(seq)
    return int(_kernels.lis_length(-a)) if len(a) else 0


def records(points) -> int:
    """Number of left-to-right maxima of y once points are sorted by x.

    Accepts a :class:`PointSet` or a plain sequence of y-values.
    """
    y = points.y_sequence() if isinstance(points, PointSet) else _as_float(points)
    if len(y) == 0:
        return 0
    running = np.maximum.accumulate(y)
    return int(np.count_nonzero(y == running))


def c_star(tolerance: float = 1e-12) -> float:
    """Root ``c >= 2`` of ``c * log(2e / c) = 1``, found by bisection."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")

    def f(c):
        return c * math.log(2 * math.e / c) - 1.0

    lo, hi = 2.0, 2 * math.e
    mid = 0.5 * (lo + hi)
    # f decreases on [2, 2e] from 1 to -1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) < tolerance and hi - lo < tolerance:
            break
        if fm > 0:
            lo = mid
        else:
            hi = mid
    return mid


C_STAR = c_star()


def empirical_cdf(values):
    """Right-continuous step function ``t -> #{v <= t} / n``."""
    v = np.sort(_as_float(values))
    n = len(v)
    if n == 0:
        raise ValueError("empirical CDF of an empty sample")

    def F(t):
        return np.searchsorted(v, t, side="right") / n

    return F


def ks_distance(values, reference_cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a continuous CDF."""
    v = np.sort(_as_float(values))
    n = len(v)
    if n == 0:
        raise ValueError("KS distance of an empty sample")
    f = np.asarray(reference_cdf(v), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    """Sup distance between the empirical CDFs of two samples."""
    a = np.sort(_as_float(a))
    b = np.sort(_as_float(b))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("KS distance of an empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def _chernoff(lam: float, x: float) -> float:
    if x == 0:
        return math.exp(-lam)
    return math.exp(x * (1.0 + math.log(lam) - math.log(x)) - lam)


def poisson_tail_upper(lam: float, x: float) -> float:
    """Chernoff bound ``(e lam / x)**x e**-lam`` on ``P[Poisson(lam) >= x]``, ``x >= lam``."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if x < lam:
        raise ValueError("upper tail bound needs x >= lam")
    return _chernoff(lam, x)


def poisson_tail_lower(lam: float, x: float) -> float:
    """Same expression, bounding ``P[Poisson(lam) <= x]`` for ``0 <= x <= lam``."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if not 0 <= x <= lam:
        raise ValueError("lower tail bound needs 0 <= x <= lam")
    return _chernoff(lam, x)


@dataclass(frozen=True)
class GapStats:
    gaps: np.ndarray
    max_gap: float
    count: int


def gap_stats(top_y_values) -> GapStats:
    """Spacings of sorted values in [0, 1] with sentinels 0 and 1."""
    v = _as_float(top_y_values)
    if len(v) and (np.any(np.diff(v) < 0) or v[0] < 0 or v[-1] > 1):
        raise ValueError("values must be sorted and lie in [0, 1]")
    gaps = np.diff(np.concatenate([[0.0], v, [1.0]]))
    return GapStats(gaps, float(gaps.max()), len(v))


@dataclass(frozen=True)
class SummaryTable:
    values: np.ndarray
    mean: float
    std: float
    q05: float
    q50: float
    q95: float


def summarize(values) -> SummaryTable:
    v = _as_float(values)
    q05, q50, q95 = np.quantile(v, [0.05, 0.5, 0.95])
    std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return SummaryTable(v, float(v.mean()), std, float(q05), float(q50), float(q95))


def expected_increasing_subsequences(n: int, k: int) -> Fraction:
    """Mean number of increasing subsequences of length ``k`` in a uniform
    permutation of size ``n``: ``C(n, k) / k!`` (exact)."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if n > 30:
        raise ValueError("exact evaluation is limited to n <= 30")
    return Fraction(math.comb(n, k), math.factorial(k))
