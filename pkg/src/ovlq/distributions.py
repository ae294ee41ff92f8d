"""Reference/sampling distributions and the empirical CDF."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from ovlq import _rng

SQRT2 = math.sqrt(2.0)
# Trapezoid: triangular flanks on [-2, -sqrt2] and [sqrt2, 2], flat in between.
_TRAP_FLANK_MASS = (2.0 - SQRT2) ** 2 / 4.0
_TRAP_PLATEAU = (2.0 - SQRT2) / 2.0

MIXTURE_MU = 0.8
MIXTURE_SIGMA = 0.6


class ParameterError(ValueError):
    """Invalid distribution parameters or malformed distribution name."""


class EmptySampleError(ValueError):
    pass


class Kind(enum.Enum):
    UNIFORM01 = "uniform"
    NORMAL = "normal"
    TRAPEZOIDAL = "trapezoidal"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class DistributionSpec:
    """A continuous distribution with a closed-form CDF and a sampler.

    ``mu`` and ``sigma`` are only meaningful for ``Kind.NORMAL``.
    """

    kind: Kind
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.kind is Kind.NORMAL:
            if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
                raise ParameterError("normal parameters must be finite")
            if self.sigma <= 0:
                raise ParameterError(f"sigma must be > 0, got {self.sigma}")

    @property
    def name(self) -> str:
        if self.kind is Kind.NORMAL:
            return f"normal({self.mu:g},{self.sigma:g})"
        return self.kind.value

    def __str__(self) -> str:
        return self.name

    def cdf(self, x):
        return cdf(self, x)

    def sample(self, n: int, seed: int) -> "EmpiricalSample":
        return sample(self, n, seed)


UNIFORM = DistributionSpec(Kind.UNIFORM01)
TRAPEZOIDAL = DistributionSpec(Kind.TRAPEZOIDAL)
MIXTURE = DistributionSpec(Kind.MIXTURE)


def normal(mu: float = 0.0, sigma: float = 1.0) -> DistributionSpec:
    return DistributionSpec(Kind.NORMAL, float(mu), float(sigma))


_NUM = r"\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*"
_NORMAL_RE = re.compile(rf"normal\({_NUM},{_NUM}\)")


def parse_distribution(name: str) -> DistributionSpec:
    """Parse ``uniform``, ``normal(mu,sigma)``, ``trapezoidal`` or ``mixture``.

    Matching is case-insensitive; surrounding whitespace is ignored.
    """
    s = name.strip().lower()
    for kind in (Kind.UNIFORM01, Kind.TRAPEZOIDAL, Kind.MIXTURE):
        if s == kind.value:
            return DistributionSpec(kind)
    m = _NORMAL_RE.fullmatch(s)
    if m:
        return normal(float(m.group(1)), float(m.group(2)))
    raise ParameterError(
        f"unknown distribution {name!r}; expected uniform, normal(mu,sigma), "
        "trapezoidal or mixture"
    )


def _normal_cdf(x, mu: float, sigma: float):
    # erfc keeps full relative accuracy in the lower tail, unlike 0.5*(1+erf).
    return 0.5 * erfc(-(x - mu) / (sigma * SQRT2))


def _trapezoidal_cdf(x):
    x = np.asarray(x, dtype=np.float64)
    left = 0.25 * (x + 2.0) ** 2
    mid = _TRAP_FLANK_MASS + (x + SQRT2) * _TRAP_PLATEAU
    right = 1.0 - 0.25 * (2.0 - x) ** 2
    out = np.where(x <= -SQRT2, left, np.where(x <= SQRT2, mid, right))
    out = np.where(x < -2.0, 0.0, out)
    return np.where(x > 2.0, 1.0, out)


def trapezoidal_quantile(u):
    """Closed-form inverse of the trapezoidal CDF on (0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    left = -2.0 + 2.0 * np.sqrt(u)
    mid = -SQRT2 + (u - _TRAP_FLANK_MASS) / _TRAP_PLATEAU
    right = 2.0 - 2.0 * np.sqrt(1.0 - u)
    return np.where(
        u <= _TRAP_FLANK_MASS,
        left,
        np.where(u < 1.0 - _TRAP_FLANK_MASS, mid, right),
    )


def cdf(spec: DistributionSpec, x):
    """Evaluate the CDF of ``spec`` at ``x`` (scalar or array).

    Returns a Python float for scalar input, otherwise an ndarray.
    """
    xa = np.asarray(x, dtype=np.float64)
    if spec.kind is Kind.UNIFORM01:
        out = np.clip(xa, 0.0, 1.0)
    elif spec.kind is Kind.NORMAL:
        out = _normal_cdf(xa, spec.mu, spec.sigma)
    elif spec.kind is Kind.TRAPEZOIDAL:
        out = _trapezoidal_cdf(xa)
    else:
        out = 0.5 * (
            _normal_cdf(xa, -MIXTURE_MU, MIXTURE_SIGMA)
            + _normal_cdf(xa, MIXTURE_MU, MIXTURE_SIGMA)
        )
    if out.ndim == 0:
        return float(out)
    return out


def uniforms_per_draw(spec: DistributionSpec) -> int:
    return {
        Kind.UNIFORM01: 1,
        Kind.TRAPEZOIDAL: 1,
        Kind.NORMAL: 2,  # Box-Muller, cosine branch only
        Kind.MIXTURE: 3,  # branch coin + Box-Muller pair
    }[spec.kind]


def _box_muller(u1, u2):
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)


def transform_uniforms(spec: DistributionSpec, u: np.ndarray) -> np.ndarray:
    """Map uniforms of shape ``(..., n, uniforms_per_draw)`` to draws ``(..., n)``."""
    if spec.kind is Kind.UNIFORM01:
        return u[..., 0]
    if spec.kind is Kind.TRAPEZOIDAL:
        return trapezoidal_quantile(u[..., 0])
    if spec.kind is Kind.NORMAL:
        return spec.mu + spec.sigma * _box_muller(u[..., 0], u[..., 1])
    z = _box_muller(u[..., 1], u[..., 2])
    centre = np.where(u[..., 0] < 0.5, -MIXTURE_MU, MIXTURE_MU)
    return centre + MIXTURE_SIGMA * z


def sample_batch(
    spec: DistributionSpec, n: int, seed: int, start: int, count: int
) -> np.ndarray:
    """Sorted samples for replicates ``start .. start + count - 1``.

    Row ``r`` depends only on ``(spec, n, seed, start + r)``.
    """
    if n < 1:
        raise EmptySampleError("sample size must be >= 1")
    k = uniforms_per_draw(spec)
    keys = _rng.substream_keys(seed, start, count)
    u = _rng.uniforms(keys, n * k).reshape(count, n, k)
    x = transform_uniforms(spec, u)
    x.sort(axis=1)
    return x


@dataclass(frozen=True)
class EmpiricalSample:
    """A sorted sample; it induces the right-continuous empirical CDF."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.sort(np.asarray(self.values, dtype=np.float64).ravel())
        if v.size == 0:
            raise EmptySampleError("a sample needs at least one value")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def ecdf(self, x):
        return ecdf(self, x)


def sample(spec: DistributionSpec, n: int, seed: int) -> EmpiricalSample:
    """Draw ``n`` i.i.d. values from ``spec``; replicate 0 of ``seed``."""
    if n < 1:
        raise EmptySampleError("sample size must be >= 1")
    return EmpiricalSample(sample_batch(spec, n, seed, 0, 1)[0])


def ecdf(s: EmpiricalSample, x):
    """``#{values <= x} / n``."""
    counts = np.searchsorted(s.values, np.asarray(x, dtype=np.float64), side="right")
    out = counts / s.n
    if np.ndim(out) == 0:
        return float(out)
    return out
