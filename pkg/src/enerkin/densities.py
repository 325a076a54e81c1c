"""Probability densities on the energy half-line.

These families describe kinetic-energy laws (exponential, gamma, uniform,
tabulated) and full-energy laws supported above an internal-energy offset
(shifted gamma).  They are shared by the kernel samplers, the grid solver
and the equilibrium checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import ValidationError

__all__ = [
    "DensityFamily",
    "Exponential",
    "GammaDensity",
    "ShiftedGamma",
    "UniformDensity",
    "Shifted",
    "Tabulated",
    "density_from_spec",
    "density_to_spec",
]


class DensityFamily:
    """A normalized probability density on a subinterval of [0, inf)."""

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """(lo, hi) with hi possibly inf; pdf vanishes outside."""
        raise NotImplementedError

    def gamma_shape(self) -> tuple[float, float] | None:
        """(nu, beta) when the law is Gamma(nu, beta) on [0, inf), else None."""
        return None


@dataclass(frozen=True)
class Exponential(DensityFamily):
    beta: float

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValidationError(f"exponential rate must be positive, got {self.beta}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.beta * np.exp(-self.beta * x), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, -np.expm1(-self.beta * x), 0.0)

    def mean(self) -> float:
        return 1.0 / self.beta

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.beta, size=size)

    def support(self):
        return (0.0, math.inf)

    def gamma_shape(self):
        return (1.0, self.beta)


@dataclass(frozen=True)
class GammaDensity(DensityFamily):
    nu: float
    beta: float

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValidationError(f"gamma shape must be positive, got {self.nu}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValidationError(f"gamma rate must be positive, got {self.beta}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(x).shape if x.ndim else ())
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = (
                self.nu * math.log(self.beta)
                + (self.nu - 1.0) * np.log(x, where=x > 0, out=np.full_like(x, -np.inf))
                - self.beta * x
                - special.gammaln(self.nu)
            )
        out = np.where(x > 0, np.exp(logp), 0.0)
        if self.nu == 1.0:
            out = np.where(x == 0, self.beta, out)
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, special.gammainc(self.nu, self.beta * x), 0.0)

    def mean(self) -> float:
        return self.nu / self.beta

    def sample(self, rng, size=None):
        return rng.gamma(self.nu, 1.0 / self.beta, size=size)

    def support(self):
        return (0.0, math.inf)

    def gamma_shape(self):
        return (self.nu, self.beta)


@dataclass(frozen=True)
class ShiftedGamma(DensityFamily):
    """Gamma law in the excess over a fixed offset; zero below the offset."""

    nu: float
    beta: float
    shift: float = 0.0

    def __post_init__(self):
        if self.shift < 0:
            raise ValidationError(f"shift must be >= 0, got {self.shift}")
        GammaDensity(self.nu, self.beta)  # parameter validation

    def _base(self) -> GammaDensity:
        return GammaDensity(self.nu, self.beta)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return self._base().pdf(x - self.shift)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return self._base().cdf(x - self.shift)

    def mean(self) -> float:
        return self.shift + self.nu / self.beta

    def sample(self, rng, size=None):
        return self.shift + rng.gamma(self.nu, 1.0 / self.beta, size=size)

    def support(self):
        return (self.shift, math.inf)

    def gamma_shape(self):
        if self.shift == 0.0:
            return (self.nu, self.beta)
        return None


@dataclass(frozen=True)
class UniformDensity(DensityFamily):
    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi and math.isfinite(self.hi)):
            raise ValidationError(f"need 0 <= lo < hi < inf, got [{self.lo}, {self.hi}]")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size=size)

    def support(self):
        return (self.lo, self.hi)


@dataclass(frozen=True)
class Shifted(DensityFamily):
    """A base density translated right by a nonnegative offset."""

    base: DensityFamily
    offset: float

    def __post_init__(self):
        if self.offset < 0:
            raise ValidationError(f"offset must be >= 0, got {self.offset}")

    def pdf(self, x):
        return self.base.pdf(np.asarray(x, dtype=float) - self.offset)

    def cdf(self, x):
        return self.base.cdf(np.asarray(x, dtype=float) - self.offset)

    def mean(self) -> float:
        return self.offset + self.base.mean()

    def sample(self, rng, size=None):
        return self.offset + self.base.sample(rng, size=size)

    def support(self):
        lo, hi = self.base.support()
        return (lo + self.offset, hi + self.offset)


class Tabulated(DensityFamily):
    """Piecewise-constant density on a uniform grid over [0, x_max]."""

    def __init__(self, x_max: float, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValidationError("tabulated density needs a 1-d value array")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValidationError("tabulated density values must be finite and >= 0")
        if not (x_max > 0):
            raise ValidationError(f"x_max must be positive, got {x_max}")
        h = x_max / values.size
        total = float(values.sum() * h)
        if abs(total - 1.0) > 1e-8:
            raise ValidationError(f"tabulated density integrates to {total}, not 1")
        self.x_max = float(x_max)
        self.values = values
        self.h = h
        self._cum = np.concatenate([[0.0], np.cumsum(values) * h])

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip((x / self.h).astype(int), 0, self.values.size - 1)
        return np.where((x >= 0) & (x <= self.x_max), self.values[idx], 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        edges = np.linspace(0.0, self.x_max, self.values.size + 1)
        return np.interp(x, edges, self._cum, left=0.0, right=1.0)

    def mean(self) -> float:
        centers = (np.arange(self.values.size) + 0.5) * self.h
        return float(np.sum(centers * self.values) * self.h)

    def sample(self, rng, size=None):
        u = rng.uniform(size=size)
        edges = np.linspace(0.0, self.x_max, self.values.size + 1)
        return np.interp(u, self._cum, edges)

    def support(self):
        return (0.0, self.x_max)


def quadrature_mass(density: DensityFamily, x_cap: float = None, n: int = 200_001) -> float:
    """Midpoint-rule mass of a density, used as an independent normalization probe."""
    lo, hi = density.support()
    if x_cap is None:
        x_cap = hi if math.isfinite(hi) else lo + 60.0 * max(1.0, density.mean() - lo)
    xs = np.linspace(lo, x_cap, n)
    mid = 0.5 * (xs[1:] + xs[:-1])
    return float(np.sum(density.pdf(mid)) * (xs[1] - xs[0]))


_FAMILY_TAGS = {
    "exponential": Exponential,
    "gamma": GammaDensity,
    "shifted_gamma": ShiftedGamma,
    "uniform": UniformDensity,
}


def density_from_spec(spec: dict) -> DensityFamily:
    """Build a density from its JSON description ({"family": ..., params})."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValidationError(f"density spec must name a family: {spec!r}")
    family = spec["family"]
    params = {k: v for k, v in spec.items() if k != "family"}
    try:
        if family == "exponential":
            return Exponential(beta=float(params["beta"]))
        if family == "gamma":
            return GammaDensity(nu=float(params["nu"]), beta=float(params["beta"]))
        if family == "shifted_gamma":
            return ShiftedGamma(
                nu=float(params["nu"]),
                beta=float(params["beta"]),
                shift=float(params.get("shift", 0.0)),
            )
        if family == "uniform":
            return UniformDensity(lo=float(params["lo"]), hi=float(params["hi"]))
    except KeyError as exc:
        raise ValidationError(f"density family {family!r} is missing parameter {exc}") from exc
    raise ValidationError(f"unknown density family {family!r}")


def density_to_spec(density: DensityFamily) -> dict:
    if isinstance(density, Exponential):
        return {"family": "exponential", "beta": density.beta}
    if isinstance(density, GammaDensity):
        return {"family": "gamma", "nu": density.nu, "beta": density.beta}
    if isinstance(density, ShiftedGamma):
        return {
            "family": "shifted_gamma",
            "nu": density.nu,
            "beta": density.beta,
            "shift": density.shift,
        }
    if isinstance(density, UniformDensity):
        return {"family": "uniform", "lo": density.lo, "hi": density.hi}
    raise ValidationError(f"density {density!r} has no JSON form")
