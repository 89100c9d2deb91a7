"""Shared physical parameter types.

Units: the single-particle Hamiltonian is the adjacency matrix of the
infinite line, so energies live in lattice units with dispersion
E(p) = 2 cos p and group velocity 2 sin p for p in [-pi, pi).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import DomainError

TWO_PI = 2.0 * math.pi

# Parameter choices used throughout the numerical study: one packet at
# +pi/4, one counterpropagating at -pi/2, interaction strength 2 + sqrt(2)
# (the point where the asymptotic two-boson scattering phase is exactly -i).
DEFAULT_U = 2.0 + math.sqrt(2.0)
DEFAULT_K1 = math.pi / 4.0
DEFAULT_K2 = -math.pi / 2.0


class Statistics(enum.Enum):
    """Exchange statistics of the two-particle state."""

    DISTINGUISHABLE = "distinguishable"
    BOSON = "boson"
    FERMION = "fermion"

    @property
    def b(self) -> float:
        """On-diagonal amplitude factor: <jj|p1 p2> = (b / 2 pi) e^{-i(p1+p2)j}."""
        if self is Statistics.DISTINGUISHABLE:
            return 1.0
        if self is Statistics.BOSON:
            return math.sqrt(2.0)
        return 0.0


@dataclass(frozen=True)
class InteractionConfig:
    """On-site pair interaction of strength U on the 2L+1 central sites.

    Attributes
    ----------
    U : float
        Interaction strength in lattice energy units.
    L : int
        Half-width of the interaction region; N = 2L + 1 sites carry it.
    statistics : Statistics
        Exchange statistics; fixes the diagonal amplitude factor ``b``.
    """

    U: float
    L: int
    statistics: Statistics = Statistics.BOSON

    def __post_init__(self):
        if self.L < 0 or int(self.L) != self.L:
            raise DomainError(f"interaction half-width must be a nonnegative integer, got {self.L}")

    @property
    def b(self) -> float:
        return self.statistics.b

    @property
    def n_sites(self) -> int:
        return 2 * self.L + 1


def _principal(p: float) -> float:
    """Map an angle to [-pi, pi)."""
    return (p + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class MomentumPair:
    """Ordered pair of single-particle momenta with an exchange-statistics tag.

    For bosons and fermions the convention p1 < p2 avoids double counting;
    distinguishable pairs are unordered.
    """

    p1: float
    p2: float
    statistics: Statistics = Statistics.BOSON

    def __post_init__(self):
        object.__setattr__(self, "p1", _principal(self.p1))
        object.__setattr__(self, "p2", _principal(self.p2))
        if self.statistics is not Statistics.DISTINGUISHABLE and not self.p1 < self.p2:
            raise DomainError(
                f"{self.statistics.value} pairs must satisfy p1 < p2, got ({self.p1}, {self.p2})"
            )

    def energy(self) -> float:
        return 2.0 * math.cos(self.p1) + 2.0 * math.cos(self.p2)

    @property
    def total(self) -> float:
        return self.p1 + self.p2

    @property
    def p_plus(self) -> float:
        return 0.5 * (self.p1 + self.p2)

    @property
    def p_minus(self) -> float:
        return 0.5 * (self.p1 - self.p2)
