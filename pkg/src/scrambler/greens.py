"""Steady-state two-point functions of the Brownian model.

The white-noise couplings make every self-energy frequency independent, so
the Keldysh 2x2 Green's function has the closed time-domain form

    G(t) = [[1/2 - n + sgn(t)/2, -n], [1 - n, 1/2 - n - sgn(t)/2]] e^{-G|t|/2}

with a single quasiparticle rate Gamma assembled additively from the menu.
No frequency-domain machinery is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CouplingMenu, Filling
from .errors import DomainError

_BRANCHES = ("u", "d")


@dataclass(frozen=True)
class QuasiparticleRate:
    """Total decay rate Gamma and the per-term contributions behind it."""

    gamma: float
    breakdown: dict

    def __post_init__(self):
        total = sum(self.breakdown.values())
        if abs(total - self.gamma) > 1e-12 * max(1.0, abs(self.gamma)):
            raise DomainError("quasiparticle rate does not match its breakdown")


@dataclass(frozen=True)
class GreensMatrix:
    """Branch-resolved two-point function at a single time."""

    guu: float
    gud: float
    gdu: float
    gdd: float
    t: float

    def __post_init__(self):
        for name in ("guu", "gud", "gdu", "gdd"):
            if abs(getattr(self, name)) > 1.0 + 1e-12:
                raise DomainError(f"|G^{name[1:]}| exceeds 1")

    def entry(self, s: str, sp: str) -> float:
        if s not in _BRANCHES or sp not in _BRANCHES:
            raise DomainError(f"branch labels must be in {_BRANCHES}")
        return getattr(self, f"g{s}{sp}")

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.guu, self.gud], [self.gdu, self.gdd]])


def quasiparticle_rate(menu: CouplingMenu, filling: Filling) -> QuasiparticleRate:
    """Assemble Gamma = sum_q J_q w^{q/2-1} + sum_p U_p w^{(sum p)/2-1}.

    w = n(1-n) is the Pauli-blockade weight; each coupling contributes
    independently because the noise realizations are uncorrelated.
    """
    menu.require_valid()
    w = filling.weight
    breakdown = {}
    for key, strength, order in menu.terms():
        breakdown[key] = strength * w ** (order / 2.0 - 1.0)
    return QuasiparticleRate(gamma=sum(breakdown.values()), breakdown=breakdown)


def _sign_of(t: float, side: int | None) -> float:
    if t == 0.0:
        if side not in (-1, 1):
            raise DomainError(
                "G(t) is discontinuous at t = 0; pass side=+1 or side=-1 "
                "to select a one-sided limit")
        return float(side)
    return math.copysign(1.0, t)


def greens_matrix(menu: CouplingMenu, filling: Filling, t: float,
                  side: int | None = None) -> GreensMatrix:
    """Time-domain Keldysh matrix; `side` selects the limit at t = 0."""
    gamma = quasiparticle_rate(menu, filling).gamma
    sgn = _sign_of(t, side)
    n = filling.n
    envelope = math.exp(-gamma * abs(t) / 2.0)
    return GreensMatrix(
        guu=(0.5 - n + 0.5 * sgn) * envelope,
        gud=-n * envelope,
        gdu=(1.0 - n) * envelope,
        gdd=(0.5 - n - 0.5 * sgn) * envelope,
        t=t,
    )


def retarded_greens(menu: CouplingMenu, filling: Filling, t: float) -> complex:
    """G^R(t) = -i theta(t) e^{-Gamma |t| / 2}, with theta(0) = 1."""
    if t < 0.0:
        return 0.0 + 0.0j
    gamma = quasiparticle_rate(menu, filling).gamma
    return -1.0j * math.exp(-gamma * t / 2.0)


def advanced_greens(menu: CouplingMenu, filling: Filling, t: float) -> complex:
    """G^A(t) = +i theta(-t) e^{-Gamma |t| / 2}, the mirror of G^R."""
    if t > 0.0:
        return 0.0 + 0.0j
    gamma = quasiparticle_rate(menu, filling).gamma
    return 1.0j * math.exp(-gamma * abs(t) / 2.0)
