"""Service-time laws and the near-critical scaling regime.

Four service families are supported: exponential, deterministic,
uniform, and two-point mixtures.  Each knows its moments, its Laplace
transform, and how to sample both itself and its stationary residual
(the forward-recurrence law with density ``(1 - F(x)) / E[S]``), the
latter through closed-form inverse CDFs so no rejection is involved.

A ``Regime`` bundles a fixed service law with a drift coefficient
``alpha`` and indexes a family of queues by ``n``: the arrival rate at
level ``n`` is chosen so that the load is ``rho_n = 1 - alpha/n``
exactly.  Its ``psi(u, n)`` is the Laplace exponent of the rescaled
netput at level ``n`` and converges to ``alpha*u + beta*u**2`` with
``beta = rate * E[S^2] / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("exponential", "deterministic", "uniform", "two_point")


@dataclass(frozen=True)
class ServiceDistribution:
    kind: str
    params: tuple

    # -- constructors -----------------------------------------------------

    @classmethod
    def exponential(cls, rate):
        if rate <= 0:
            raise ValueError("rate must be positive")
        return cls("exponential", (float(rate),))

    @classmethod
    def deterministic(cls, value):
        if value <= 0:
            raise ValueError("value must be positive")
        return cls("deterministic", (float(value),))

    @classmethod
    def uniform(cls, lo, hi):
        if not 0 <= lo < hi:
            raise ValueError("need 0 <= lo < hi")
        return cls("uniform", (float(lo), float(hi)))

    @classmethod
    def two_point(cls, a, b, p=0.5):
        if not 0 < a < b:
            raise ValueError("need 0 < a < b")
        if not 0 < p < 1:
            raise ValueError("need 0 < p < 1")
        return cls("two_point", (float(a), float(b), float(p)))

    @classmethod
    def standard(cls, kind, mean=1.0):
        """The four reference shapes, parameterized by their mean."""
        m = float(mean)
        if kind == "exponential":
            return cls.exponential(1.0 / m)
        if kind == "deterministic":
            return cls.deterministic(m)
        if kind == "uniform":
            return cls.uniform(0.0, 2.0 * m)
        if kind == "two_point":
            return cls.two_point(0.5 * m, 1.5 * m, 0.5)
        raise ValueError(f"unknown service kind {kind!r}")

    # -- moments -----------------------------------------------------------

    def mean(self):
        if self.kind == "exponential":
            return 1.0 / self.params[0]
        if self.kind == "deterministic":
            return self.params[0]
        if self.kind == "uniform":
            lo, hi = self.params
            return 0.5 * (lo + hi)
        a, b, p = self.params
        return p * a + (1.0 - p) * b

    def second_moment(self):
        if self.kind == "exponential":
            return 2.0 / self.params[0] ** 2
        if self.kind == "deterministic":
            return self.params[0] ** 2
        if self.kind == "uniform":
            lo, hi = self.params
            return (lo * lo + lo * hi + hi * hi) / 3.0
        a, b, p = self.params
        return p * a * a + (1.0 - p) * b * b

    def variance(self):
        return self.second_moment() - self.mean() ** 2

    def residual_mean(self):
        """Mean of the stationary residual, E[S^2] / (2 E[S])."""
        return self.second_moment() / (2.0 * self.mean())

    # -- transforms ---------------------------------------------------------

    def laplace(self, u):
        """E[exp(-u S)] for u >= 0."""
        u = float(u)
        if u < 0:
            raise ValueError("u must be nonnegative")
        if u == 0.0:
            return 1.0
        if self.kind == "exponential":
            r = self.params[0]
            return r / (r + u)
        if self.kind == "deterministic":
            return math.exp(-u * self.params[0])
        if self.kind == "uniform":
            lo, hi = self.params
            width = hi - lo
            return math.exp(-u * lo) * (-math.expm1(-u * width)) / (u * width)
        a, b, p = self.params
        return p * math.exp(-u * a) + (1.0 - p) * math.exp(-u * b)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "exponential":
            return -np.expm1(-self.params[0] * np.maximum(x, 0.0))
        if self.kind == "deterministic":
            return (x >= self.params[0]).astype(float)
        if self.kind == "uniform":
            lo, hi = self.params
            return np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        a, b, p = self.params
        return np.where(x < a, 0.0, np.where(x < b, p, 1.0))

    def residual_cdf(self, x):
        """CDF of the stationary residual, int_0^x (1 - F) / E[S]."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        m = self.mean()
        if self.kind == "exponential":
            return -np.expm1(-self.params[0] * x)
        if self.kind == "deterministic":
            return np.clip(x / self.params[0], 0.0, 1.0)
        if self.kind == "uniform":
            lo, hi = self.params
            t = np.clip(x - lo, 0.0, hi - lo)
            return (np.minimum(x, lo) + t - t * t / (2.0 * (hi - lo))) / m
        a, b, p = self.params
        x = np.minimum(x, b)
        return (np.minimum(x, a) + (1.0 - p) * np.maximum(x - a, 0.0)) / m

    # -- sampling -----------------------------------------------------------

    def sample(self, rng, size=None):
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.params[0], size)
        if self.kind == "deterministic":
            c = self.params[0]
            return c if size is None else np.full(size, c)
        if self.kind == "uniform":
            lo, hi = self.params
            return rng.uniform(lo, hi, size)
        a, b, p = self.params
        u = rng.random(size)
        return np.where(u < p, a, b) if size is not None else (a if u < p else b)

    def sample_residual(self, rng, size=None):
        """Draw from the stationary residual via its inverse CDF."""
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.params[0], size)
        u = rng.random(size)
        m = self.mean()
        if self.kind == "deterministic":
            return u * self.params[0]
        if self.kind == "uniform":
            lo, hi = self.params
            q0 = lo / m
            head = u * m
            rest = (hi - lo) * m * (u - q0)
            tail = hi - np.sqrt(np.maximum((hi - lo) ** 2 - 2.0 * rest, 0.0))
            return np.where(u <= q0, head, tail)
        a, b, p = self.params
        q0 = a / m
        return np.where(u <= q0, u * m, a + (u * m - a) / (1.0 - p))


@dataclass(frozen=True)
class Regime:
    """Near-critical family: fixed service law, load 1 - alpha/n at level n."""

    service: ServiceDistribution
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def base_rate(self):
        """Critical arrival rate 1 / E[S]."""
        return 1.0 / self.service.mean()

    @property
    def beta(self):
        """Diffusion coefficient rate * E[S^2] / 2 of the limit exponent."""
        return self.base_rate * self.service.second_moment() / 2.0

    def rho(self, n):
        load = 1.0 - self.alpha / n
        if load <= 0.0:
            raise ValueError(f"n={n} is too small for alpha={self.alpha}")
        return load

    def arrival_rate(self, n):
        return self.rho(n) * self.base_rate

    def psi(self, u, n):
        """Laplace exponent of the rescaled netput at level n.

        The netput at level n is compound-Poisson input minus unit drift,
        sped up by n**2 in time and shrunk by n in space.
        """
        u = float(u)
        lam = self.arrival_rate(n)
        return n * u - n * n * lam * (1.0 - self.service.laplace(u / n))

    def psi_limit(self, u):
        """Quadratic limit alpha*u + beta*u**2 of psi(u, n)."""
        return self.alpha * u + self.beta * u * u


def build_regime(kind, alpha, mean=1.0):
    """Regime for one of the four reference service shapes."""
    return Regime(ServiceDistribution.standard(kind, mean), float(alpha))
