"""Dispersion relations, rapidities and 1+1D Lorentz boosts (hbar = c = 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Species:
    """A massive scalar species; ``internal_gap`` is the detector gap Omega."""

    rest_mass: float
    internal_gap: float = 0.0

    def __post_init__(self):
        if not self.rest_mass > 0:
            raise ValueError(f"rest_mass must be positive, got {self.rest_mass}")
        if self.internal_gap < 0:
            raise ValueError(f"internal_gap must be non-negative, got {self.internal_gap}")

    def level_mass(self, level: int) -> float:
        if level not in (0, 1):
            raise ValueError(f"detector level must be 0 or 1, got {level}")
        return self.rest_mass + (self.internal_gap if level == 1 else 0.0)


@dataclass(frozen=True)
class BoostParam:
    rapidity: float

    @property
    def velocity(self) -> float:
        return float(np.tanh(self.rapidity))

    @property
    def gamma(self) -> float:
        return float(np.cosh(self.rapidity))

    @classmethod
    def from_velocity(cls, v: float) -> "BoostParam":
        if abs(v) >= 1:
            raise ValueError("|v| must be < 1")
        return cls(float(np.arctanh(v)))


def dispersion_detector(p, level: int, s: Species):
    """Energy of a detector quantum of momentum ``p`` in internal level ``level``."""
    m = s.level_mass(level)
    return np.hypot(p, m)


def dispersion_photon(k):
    return np.abs(k)


def boost_momentum(p, b: BoostParam | float, m: float):
    """Momentum after a boost of rapidity ``b``.

    Massive momenta shift in rapidity, massless ones scale by ``exp(+-xi)``
    with positive-k photons blueshifted by positive rapidity.
    """
    xi = b.rapidity if isinstance(b, BoostParam) else float(b)
    if m < 0:
        raise ValueError("mass must be non-negative")
    if m == 0:
        k = np.asarray(p, dtype=float)
        return np.where(k >= 0, np.exp(xi) * k, np.exp(-xi) * k)
    return m * np.sinh(np.arcsinh(np.asarray(p, dtype=float) / m) + xi)


def gamma_of(p, m: float):
    if not m > 0:
        raise ValueError("gamma_of needs a positive mass")
    return np.sqrt(1.0 + (np.asarray(p, dtype=float) / m) ** 2)


def rapidity_of(p, m: float):
    return np.arcsinh(np.asarray(p, dtype=float) / m)
