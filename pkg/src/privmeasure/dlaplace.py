"""Discrete Laplacian distribution on the integers.

``Lap_Z(sigma)`` has probability mass function

    f(z) = (1 - p) / (1 + p) * exp(-|z| / sigma),    p = exp(-1 / sigma),

and variance ``2p / (1 - p)**2``, which is strictly below the ``2 sigma**2``
of the continuous Laplace law with the same scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Above this value of |z|/sigma the mass is evaluated in log space.
_LOG_SPACE_CUTOFF = 30.0


@dataclass(frozen=True)
class DiscreteLaplace:
    """Immutable ``Lap_Z(sigma)`` distribution."""

    sigma: float
    p: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma!r}")
        object.__setattr__(self, "p", math.exp(-1.0 / self.sigma))

    @property
    def _log_norm(self) -> float:
        # log((1 - p) / (1 + p)) without cancellation for p close to 1
        return math.log(-math.expm1(-1.0 / self.sigma)) - math.log1p(self.p)

    def logpmf(self, z):
        z = np.abs(np.asarray(z, dtype=np.float64))
        return self._log_norm - z / self.sigma

    def pmf(self, z):
        z = np.asarray(z)
        a = np.abs(z.astype(np.float64)) / self.sigma
        norm = (1.0 - self.p) / (1.0 + self.p)
        with np.errstate(under="ignore"):
            direct = norm * np.power(self.p, np.abs(z.astype(np.float64)))
            out = np.where(a > _LOG_SPACE_CUTOFF, np.exp(self.logpmf(z)), direct)
        return out if out.ndim else float(out)

    def cdf(self, z):
        """``P(Z <= z)`` for integer ``z``."""
        z = np.floor(np.asarray(z, dtype=np.float64))
        with np.errstate(under="ignore", over="ignore"):
            upper_tail = np.exp((-(z + 1.0) / self.sigma)) / (1.0 + self.p)
            lower = np.exp(z / self.sigma) / (1.0 + self.p)
        out = np.where(z >= 0, 1.0 - upper_tail, lower)
        return out if out.ndim else float(out)

    def tail(self, w: int) -> float:
        """One-sided tail ``P(Z > w)`` for ``w >= 0``."""
        return math.exp(-(w + 1) / self.sigma) / (1.0 + self.p)

    def mean(self) -> float:
        return 0.0

    def variance(self) -> float:
        q = -math.expm1(-1.0 / self.sigma)  # 1 - p
        return 2.0 * self.p / (q * q)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw from ``Lap_Z(sigma)`` as a difference of two geometric variables.

        ``numpy`` geometric draws count trials (support starting at 1); the
        offset cancels in the difference.
        """
        success = -math.expm1(-1.0 / self.sigma)
        g1 = rng.geometric(success, size=size)
        g2 = rng.geometric(success, size=size)
        return g1 - g2


def pmf(sigma: float, z):
    return DiscreteLaplace(sigma).pmf(z)


def variance(sigma: float) -> float:
    return DiscreteLaplace(sigma).variance()


def sample(sigma: float, rng: np.random.Generator, size=None):
    return DiscreteLaplace(sigma).sample(rng, size=size)
