"""Fixed-size and Poissonized permuton samples, thinning, and the nested
fixed/Poisson coupling used to compare the two sampling schemes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bst import DuplicateLabelError, PointSet
from .permutons import Permuton

__all__ = [
    "SampleRequest",
    "CouplingTriple",
    "replicate_rng",
    "sample_fixed",
    "sample_poissonized",
    "sample",
    "thin",
    "depoissonization_coupling",
]


def replicate_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for one replicate.

    The stream is ``SeedSequence(seed, spawn_key=stream)`` fed to PCG64, so
    ``(seed, n, replicate)`` reproduces the exact sample regardless of which
    worker draws it or in what order.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SampleRequest:
    model: Permuton
    n: int
    mode: str = "fixed"
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.mode not in ("fixed", "poisson"):
            raise ValueError("mode must be 'fixed' or 'poisson'")

    def draw(self, *stream: int) -> PointSet:
        return sample(self.model, self.n, replicate_rng(self.seed, *stream), self.mode)


def _points(x, y) -> PointSet:
    try:
        return PointSet(x, y)
    except DuplicateLabelError as exc:
        raise DuplicateLabelError(f"sampler produced colliding coordinates: {exc}") from None


def sample_fixed(model: Permuton, n: int, rng: np.random.Generator) -> PointSet:
    """``n`` i.i.d. points with law ``model``."""
    x, y = model.sample(rng, int(n))
    return _points(x, y)


def sample_poissonized(model: Permuton, n: float, rng: np.random.Generator) -> PointSet:
    """Poisson point process with intensity ``n * model``."""
    count = int(rng.poisson(n))
    x, y = model.sample(rng, count)
    return _points(x, y)


def sample(model: Permuton, n, rng: np.random.Generator, mode: str = "fixed") -> PointSet:
    if mode == "fixed":
        return sample_fixed(model, n, rng)
    if mode == "poisson":
        return sample_poissonized(model, n, rng)
    raise ValueError(f"unknown sampling mode {mode!r}")


def thin(points: PointSet, keep_probability, rng: np.random.Generator, return_indices: bool = False):
    """Keep each point independently with probability ``keep_probability(x, y)``.

    ``keep_probability`` may be a callable or a constant.  With
    ``return_indices`` the indices of the kept points are returned as well.
    """
    if callable(keep_probability):
        p = np.broadcast_to(np.asarray(keep_probability(points.x, points.y), dtype=float), points.x.shape)
    else:
        p = np.full(len(points), float(keep_probability))
    if np.any((p < 0) | (p > 1)):
        raise ValueError("keep probabilities must lie in [0, 1]")
    kept = np.flatnonzero(rng.random(len(points)) < p)
    if return_indices:
        return points.subset(kept), kept
    return points.subset(kept)


@dataclass(frozen=True)
class CouplingTriple:
    """Nested samples ``inner ⊆ middle ⊆ outer``.

    ``middle`` has exactly ``n`` points and is a uniform subset of ``outer``
    (``N+ ~ Poisson(n + n**alpha)``); ``inner`` is a uniform subset of
    ``middle`` of size ``N- ~ Poisson(n - n**alpha)``.  When ``N+ < n``
    (resp. ``N- > n``) the corresponding layer is None and the flag is False.
    Index arrays map each layer into the one containing it.
    """

    n: int
    alpha: float
    outer: PointSet
    middle: PointSet | None
    inner: PointSet | None
    middle_in_outer: np.ndarray | None
    inner_in_middle: np.ndarray | None
    n_plus: int
    n_minus: int

    @property
    def valid_plus(self) -> bool:
        return self.n_plus >= self.n

    @property
    def valid_minus(self) -> bool:
        return self.n_minus <= self.n

    @property
    def valid(self) -> bool:
        return self.inner is not None


def depoissonization_coupling(model: Permuton, n: int, alpha: float, rng: np.random.Generator) -> CouplingTriple:
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie in (1/2, 1)")
    spread = float(n) ** alpha
    n_plus = int(rng.poisson(n + spread))
    x, y = model.sample(rng, n_plus)
    outer = _points(x, y)
    n_minus = int(rng.poisson(max(n - spread, 0.0)))
    middle = inner = mid_idx = in_idx = None
    if n_plus >= n:
        mid_idx = np.sort(rng.choice(n_plus, size=n, replace=False))
        middle = outer.subset(mid_idx)
        if n_minus <= n:
            in_idx = np.sort(rng.choice(n, size=n_minus, replace=False))
            inner = middle.subset(in_idx)
    return CouplingTriple(int(n), float(alpha), outer, middle, inner, mid_idx, in_idx, n_plus, n_minus)
