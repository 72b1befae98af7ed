"""Catalog of permutons: samplers, densities, left derivatives.

Each model is an immutable object whose ``sample`` method draws i.i.d.
points from an externally supplied ``numpy.random.Generator``.  Models are
created from the textual grammar accepted by :func:`parse_model`::

    lebesgue | mallows:gamma=<g> | band:beta=<b> | strips
    | strips-phi:delta=<d> | mu1 | mu2
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .distributions import Distribution1D, PointMass, TentPower, TruncatedExponential, Uniform

__all__ = [
    "SamplerError",
    "Permuton",
    "LebesgueSquare",
    "Mallows",
    "BandDiagonal",
    "DiagonalStrips",
    "VanishingStrips",
    "OscillatingMu1",
    "CornerMu2",
    "mallows_density",
    "left_derivative",
    "marginal_check",
    "rejection_sample",
    "parse_model",
    "CATALOG",
    "OSCILLATION_INTEGRAL",
]

MAX_ATTEMPTS = 10**6

# int_0^{1/2} sin(log x) dx = [x (sin log x - cos log x) / 2]_0^{1/2}
OSCILLATION_INTEGRAL = 0.25 * (math.sin(math.log(0.5)) - math.cos(math.log(0.5)))


class SamplerError(RuntimeError):
    pass


def rejection_sample(density, bound: float, size: int, rng: np.random.Generator,
                     max_attempts: int = MAX_ATTEMPTS):
    """Draw ``size`` points from ``density`` on the unit square.

    Proposals are uniform on the square and accepted with probability
    ``density / bound``.  Raises :class:`SamplerError` when ``max_attempts``
    consecutive proposals are all rejected, or when the density exceeds
    the bound.  Returns ``(x, y, attempts)``.
    """
    xs, ys = [], []
    need = size
    attempts = 0
    dry = 0
    while need > 0:
        batch = max(64, int(need * bound * 1.1) + 16)
        px = rng.random(batch)
        py = rng.random(batch)
        d = density(px, py)
        if np.any(d > bound):
            raise SamplerError(f"density {d.max():.6g} exceeds envelope {bound:.6g}")
        keep = rng.random(batch) * bound < d
        idx = np.flatnonzero(keep)[:need]
        attempts += int(idx[-1]) + 1 if len(idx) == need else batch
        if len(idx) == 0:
            dry += batch
            if dry >= max_attempts:
                raise SamplerError(f"no proposal accepted in {dry} attempts")
            continue
        dry = 0
        xs.append(px[idx])
        ys.append(py[idx])
        need -= len(idx)
    if not xs:
        return np.empty(0), np.empty(0), 0
    return np.concatenate(xs), np.concatenate(ys), attempts


class Permuton:
    """Base class for the catalog models."""

    name = "permuton"
    can_evaluate_density = False
    has_left_derivative = False
    # bounded density on the square, continuous and positive near the left edge
    bounded_positive_near_left_edge = False

    def spec(self) -> str:
        return self.name

    def __repr__(self):
        return f"{type(self).__name__}({self.spec()!r})"

    def sample(self, rng: np.random.Generator, size: int):
        """Return arrays ``(x, y)`` of ``size`` i.i.d. points."""
        raise NotImplementedError

    def sample_point(self, rng: np.random.Generator) -> tuple[float, float]:
        x, y = self.sample(rng, 1)
        return float(x[0]), float(y[0])

    def density(self, x, y):
        raise NotImplementedError(f"{self.name} has no pointwise density")

    def left_derivative(self) -> Distribution1D | None:
        return None


class LebesgueSquare(Permuton):
    name = "lebesgue"
    can_evaluate_density = True
    has_left_derivative = True
    bounded_positive_near_left_edge = True

    def sample(self, rng, size):
        return rng.random(size), rng.random(size)

    def density(self, x, y):
        return np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def left_derivative(self):
        return Uniform()


def mallows_density(gamma: float, x, y):
    """Density of the Mallows permuton with parameter ``gamma`` (nonzero)."""
    if gamma == 0:
        raise ValueError("gamma must be nonzero (gamma -> 0 is the uniform density)")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = float(gamma)
    den = math.exp(g / 2) * np.cosh(g * (x - y)) - math.exp(-g / 2) * np.cosh(g * (x + y - 1))
    return g * math.sinh(g) / den**2


class Mallows(Permuton):
    name = "mallows"
    can_evaluate_density = True
    has_left_derivative = True
    bounded_positive_near_left_edge = True

    def __init__(self, gamma: float):
        if gamma == 0:
            raise ValueError("gamma must be nonzero")
        self.gamma = float(gamma)
        g = np.linspace(0.0, 1.0, 200)
        gx, gy = np.meshgrid(g, g)
        self.envelope = 1.1 * float(mallows_density(self.gamma, gx, gy).max())

    def spec(self):
        return f"mallows:gamma={self.gamma:g}"

    def density(self, x, y):
        return mallows_density(self.gamma, x, y)

    def sample(self, rng, size):
        x, y, _ = rejection_sample(self.density, self.envelope, size, rng)
        return x, y

    def left_derivative(self):
        # rho(0, y) simplifies to 2g exp(-2g y) / (1 - exp(-2g))
        return TruncatedExponential(2.0 * self.gamma)


class BandDiagonal(Permuton):
    """Mass ``beta`` uniform on ``[0,beta] x [0,1]``, the rest on the segment
    from ``(beta, 0)`` to ``(1, 1)``."""

    name = "band"
    has_left_derivative = True

    def __init__(self, beta: float):
        if not 0.0 < beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        self.beta = float(beta)

    def spec(self):
        return f"band:beta={self.beta:g}"

    def sample(self, rng, size, return_component: bool = False):
        in_band = rng.random(size) < self.beta
        u = rng.random(size)
        v = rng.random(size)
        x = np.where(in_band, self.beta * u, self.beta + (1.0 - self.beta) * v)
        y = v
        if return_component:
            return x, y, in_band
        return x, y

    def left_derivative(self):
        return Uniform()


def in_strips(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return ((x <= y) & (y <= x + 0.5)) | (y <= x - 0.5)


class DiagonalStrips(Permuton):
    """Density 2 on ``{x <= y <= x + 1/2} U {y <= x - 1/2}``."""

    name = "strips"
    can_evaluate_density = True
    has_left_derivative = True

    def sample(self, rng, size):
        x = rng.random(size)
        y = np.mod(x + 0.5 * rng.random(size), 1.0)
        return x, y

    def density(self, x, y):
        return np.where(in_strips(x, y), 2.0, 0.0)

    def left_derivative(self):
        return Uniform(0.0, 0.5)


def strips_l1_distance(x, y):
    """L1 distance from points of the strips support to its complement,
    with the corner ``(1, 0)`` added to the complement.  Zero off the support."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    upper = (x <= y) & (y <= x + 0.5)
    lower = y <= x - 0.5
    # boundaries are lines of slope 1, at L1 distance |y - x - c| from (x, y)
    d_upper = np.minimum(y - x, x + 0.5 - y)
    d_lower = np.minimum(x - 0.5 - y, (1.0 - x) + y)
    return np.where(upper, d_upper, np.where(lower, d_lower, 0.0))


class VanishingStrips(Permuton):
    """Continuous variant of the strips: ``phi(dist)`` with ``phi(t) = c t**delta``."""

    name = "strips-phi"
    can_evaluate_density = True
    has_left_derivative = True

    def __init__(self, delta: float = 1.0):
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.delta = float(delta)
        # int_0^{1/4} c t^delta dt = 1/2
        self.c = 0.5 * (self.delta + 1) * 4.0 ** (self.delta + 1)
        self.envelope = self.phi(0.25)

    def spec(self):
        return f"strips-phi:delta={self.delta:g}"

    def phi(self, t):
        return self.c * np.maximum(np.asarray(t, dtype=float), 0.0) ** self.delta

    def density(self, x, y):
        return np.where(in_strips(x, y), self.phi(strips_l1_distance(x, y)), 0.0)

    def sample(self, rng, size):
        # float rounding in the density can overshoot sup phi by an ulp
        x, y, _ = rejection_sample(self.density, self.envelope * (1 + 1e-12), size, rng)
        return x, y

    def left_derivative(self):
        return TentPower(self.delta, 0.5)


class OscillatingMu1(Permuton):
    """Density ``1 +- sin(log x)`` on the left half, ``1 -+ 2C`` on the right half."""

    name = "mu1"
    can_evaluate_density = True
    envelope = 2.0

    def density(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = OSCILLATION_INTEGRAL
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.sin(np.log(np.where(x > 0, x, 1.0)))
        low = y < 0.5
        left = np.where(low, 1.0 + s, 1.0 - s)
        right = np.where(low, 1.0 - 2 * c, 1.0 + 2 * c)
        return np.where(x < 0.5, left, right)

    def sample(self, rng, size):
        x, y, _ = rejection_sample(self.density, self.envelope, size, rng)
        return x, y


class CornerMu2(Permuton):
    """Half mass on the segment ``t -> (t, 1/2 + t)``, half on a copy of mu1
    squeezed into ``[1/2, 1] x [0, 1/2]``."""

    name = "mu2"
    has_left_derivative = True

    def __init__(self):
        self._mu1 = OscillatingMu1()

    def sample(self, rng, size, return_component: bool = False):
        on_segment = rng.random(size) < 0.5
        # t on the 2**-53 grid keeps 1/2 + t and (1/2 + t) - t exact
        t = np.floor(rng.random(size) * 2.0**52) / 2.0**53
        m = int(np.count_nonzero(~on_segment))
        cx, cy = self._mu1.sample(rng, m)
        x = np.empty(size)
        y = np.empty(size)
        x[on_segment] = t[on_segment]
        y[on_segment] = 0.5 + t[on_segment]
        x[~on_segment] = 0.5 * (cx + 1.0)
        y[~on_segment] = 0.5 * cy
        if return_component:
            return x, y, on_segment
        return x, y

    def left_derivative(self):
        return PointMass(0.5)


def left_derivative(model: Permuton) -> Distribution1D | None:
    """Limit of ``mu([0,x] x .) / x`` as ``x -> 0+``, or None if it does not exist."""
    return model.left_derivative()


def marginal_check(model: Permuton, grid_size: int, sample_count: int, rng: np.random.Generator) -> float:
    """Largest deviation between empirical marginal cell masses and cell widths."""
    if sample_count < 10**4:
        raise ValueError("sample_count must be at least 1e4")
    x, y = model.sample(rng, sample_count)
    edges = np.linspace(0.0, 1.0, grid_size + 1)
    hx, _ = np.histogram(x, edges)
    hy, _ = np.histogram(y, edges)
    w = 1.0 / grid_size
    return float(max(np.abs(hx / sample_count - w).max(), np.abs(hy / sample_count - w).max()))


def mallows_marginal_integral(gamma: float, x: float) -> float:
    val, _ = integrate.quad(lambda t: float(mallows_density(gamma, x, t)), 0.0, 1.0, epsabs=1e-10, epsrel=1e-12)
    return val


_PARAMS = {
    "lebesgue": (LebesgueSquare, ()),
    "mallows": (Mallows, ("gamma",)),
    "band": (BandDiagonal, ("beta",)),
    "strips": (DiagonalStrips, ()),
    "strips-phi": (VanishingStrips, ("delta",)),
    "mu1": (OscillatingMu1, ()),
    "mu2": (CornerMu2, ()),
}

CATALOG = (
    "lebesgue",
    "mallows:gamma=2",
    "mallows:gamma=-2",
    "band:beta=0.1",
    "band:beta=0.2",
    "strips",
    "strips-phi:delta=1",
    "mu1",
    "mu2",
)


def parse_model(text: str) -> Permuton:
    """Build a model from ``name[:key=value[,key=value]]``."""
    name, _, rest = text.strip().partition(":")
    if name not in _PARAMS:
        raise ValueError(f"unknown model {name!r}; expected one of {', '.join(_PARAMS)}")
    cls, keys = _PARAMS[name]
    kwargs = {}
    if rest:
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            k = k.strip()
            if not eq or k not in keys:
                raise ValueError(f"bad parameter {item!r} for model {name!r}")
            try:
                kwargs[k] = float(v)
            except ValueError:
                raise ValueError(f"parameter {k!r} must be a number, got {v!r}") from None
    missing = [k for k in keys if k not in kwargs and name != "strips-phi"]
    if missing:
        raise ValueError(f"model {name!r} needs parameter(s) {', '.join(missing)}")
    return cls(**kwargs)
