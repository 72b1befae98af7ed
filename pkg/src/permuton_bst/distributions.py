"""One-dimensional laws on [0, 1] with CDF, quantile and conditional sampling."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

__all__ = [
    "Distribution1D",
    "Uniform",
    "TruncatedExponential",
    "TentPower",
    "PointMass",
]


class Distribution1D:
    """Base class; subclasses supply ``cdf`` and ``quantile`` (vectorised)."""

    atomless = True

    def cdf(self, y):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def density(self, y):
        raise NotImplementedError

    def mean(self) -> float:
        # E[Y] = int_0^1 (1 - F(y)) dy
        val, _ = integrate.quad(lambda t: 1.0 - float(self.cdf(t)), 0.0, 1.0, epsabs=1e-12, limit=200)
        return val

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))

    def sample_conditional(self, a, b, rng: np.random.Generator, size=None):
        """Sample conditioned on the open interval ``(a, b)`` by restricted inversion."""
        if not self.atomless:
            raise ValueError("conditional sampling needs an atomless law")
        fa = np.asarray(self.cdf(a), dtype=float)
        fb = np.asarray(self.cdf(b), dtype=float)
        mass = fb - fa
        if np.any(mass <= 0.0):
            raise ValueError(f"interval ({a}, {b}) has no mass under {self!r}")
        u = fa + mass * rng.random(size if size is not None else np.shape(mass))
        y = self.quantile(u)
        # rounding in the quantile may land on an endpoint
        return np.clip(y, np.nextafter(a, np.inf), np.nextafter(b, -np.inf))


class Uniform(Distribution1D):
    def __init__(self, lo: float = 0.0, hi: float = 1.0):
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("need 0 <= lo < hi <= 1")
        self.lo = float(lo)
        self.hi = float(hi)

    def __repr__(self):
        return f"Uniform({self.lo}, {self.hi})"

    def cdf(self, y):
        return np.clip((np.asarray(y, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        return np.where((y >= self.lo) & (y <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


class TruncatedExponential(Distribution1D):
    """Density proportional to ``exp(-rate * y)`` on [0, 1] (any nonzero rate)."""

    def __init__(self, rate: float):
        if rate == 0:
            raise ValueError("rate must be nonzero; use Uniform for rate 0")
        self.rate = float(rate)
        # -expm1(-r) = 1 - exp(-r), stable for small |r|
        self._z = -math.expm1(-self.rate)

    def __repr__(self):
        return f"TruncatedExponential(rate={self.rate})"

    def cdf(self, y):
        y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
        return -np.expm1(-self.rate * y) / self._z

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return np.clip(-np.log1p(-u * self._z) / self.rate, 0.0, 1.0)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        inside = (y >= 0) & (y <= 1)
        return np.where(inside, self.rate * np.exp(-self.rate * y) / self._z, 0.0)


class TentPower(Distribution1D):
    """Density ``c * min(y, h - y)**delta`` on [0, h], normalised to mass 1."""

    def __init__(self, delta: float, h: float = 0.5):
        if delta < 0:
            raise ValueError("delta must be >= 0")
        self.delta = float(delta)
        self.h = float(h)

    def __repr__(self):
        return f"TentPower(delta={self.delta}, h={self.h})"

    def cdf(self, y):
        y = np.clip(np.asarray(y, dtype=float), 0.0, self.h)
        half = self.h / 2
        p = self.delta + 1
        lower = 0.5 * (y / half) ** p
        upper = 1.0 - 0.5 * ((self.h - y) / half) ** p
        return np.where(y <= half, lower, upper)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        half = self.h / 2
        p = self.delta + 1
        lower = half * (2 * u) ** (1 / p)
        upper = self.h - half * (2 * (1 - u)) ** (1 / p)
        return np.where(u <= 0.5, lower, upper)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        half = self.h / 2
        p = self.delta + 1
        d = np.minimum(y, self.h - y)
        return np.where((y >= 0) & (y <= self.h), 0.5 * p / half * (np.maximum(d, 0) / half) ** self.delta, 0.0)

    def mean(self) -> float:
        return self.h / 2


class PointMass(Distribution1D):
    atomless = False

    def __init__(self, at: float):
        self.at = float(at)

    def __repr__(self):
        return f"PointMass({self.at})"

    def cdf(self, y):
        return (np.asarray(y, dtype=float) >= self.at).astype(float)

    def quantile(self, u):
        return np.full(np.shape(u), self.at)

    def mean(self) -> float:
        return self.at
