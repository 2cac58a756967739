"""Positive laws (inter-arrival times, packet lengths) and batch-size laws.

``Law`` is a unit-mean shape; callers scale by the desired mean.  ``BatchLaw``
is integer valued on ``{1, 2, ...}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedDistribution

POSITIVE_FAMILIES = ("deterministic", "exponential", "erlang", "lognormal")
BATCH_FAMILIES = ("deterministic", "geometric", "shifted-poisson")


@dataclass(frozen=True)
class Law:
    """Unit-mean positive law with squared coefficient of variation ``scv``.

    ``scv`` may be omitted for families where it is fixed (deterministic: 0,
    exponential: 1).  Erlang-k needs ``scv = 1/k``.
    """

    family: str
    scv: float | None = None

    def __post_init__(self):
        fam, scv = self.family, self.scv
        if fam not in POSITIVE_FAMILIES:
            raise UnsupportedDistribution(f"unknown family {fam!r}; expected one of {POSITIVE_FAMILIES}")
        fixed = {"deterministic": 0.0, "exponential": 1.0}
        if fam in fixed:
            if scv is not None and abs(scv - fixed[fam]) > 1e-12:
                raise UnsupportedDistribution(f"{fam} has scv {fixed[fam]}, got {scv}")
            scv = fixed[fam]
        elif scv is None or not scv > 0 or not math.isfinite(scv):
            raise UnsupportedDistribution(f"{fam} needs a finite scv > 0")
        elif fam == "erlang":
            k = round(1.0 / scv)
            if k < 1 or abs(1.0 / k - scv) > 1e-9:
                raise UnsupportedDistribution(f"erlang scv must be 1/k for integer k, got {scv}")
        object.__setattr__(self, "scv", float(scv))

    def sample(self, rng: np.random.Generator, size, mean: float = 1.0) -> np.ndarray:
        if self.family == "deterministic":
            return np.full(size, float(mean))
        if self.family == "exponential":
            return rng.exponential(mean, size)
        if self.family == "erlang":
            k = round(1.0 / self.scv)
            return rng.gamma(k, mean / k, size)
        s2 = math.log1p(self.scv)
        return mean * rng.lognormal(-0.5 * s2, math.sqrt(s2), size)


@dataclass(frozen=True)
class BatchLaw:
    """Integer batch sizes with mean ``mean`` >= 1.

    geometric on ``{1, 2, ...}`` has scv ``1 - 1/mean``; shifted Poisson
    (``1 + Poisson(mean - 1)``) has scv ``(mean - 1) / mean**2``.
    """

    family: str
    mean: float = 1.0

    def __post_init__(self):
        if self.family not in BATCH_FAMILIES:
            raise UnsupportedDistribution(f"unknown batch family {self.family!r}; expected one of {BATCH_FAMILIES}")
        if not self.mean >= 1 or not math.isfinite(self.mean):
            raise UnsupportedDistribution(f"batch mean must be >= 1, got {self.mean}")
        if self.family == "deterministic" and self.mean != int(self.mean):
            raise UnsupportedDistribution("deterministic batch size must be an integer")

    @property
    def scv(self) -> float:
        m = self.mean
        if self.family == "deterministic":
            return 0.0
        if self.family == "geometric":
            return 1.0 - 1.0 / m
        return (m - 1.0) / m**2

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "deterministic":
            return np.full(size, int(self.mean), dtype=np.int64)
        if self.family == "geometric":
            return rng.geometric(1.0 / self.mean, size).astype(np.int64)
        return 1 + rng.poisson(self.mean - 1.0, size).astype(np.int64)
