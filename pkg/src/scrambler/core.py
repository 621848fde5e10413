"""Model definition: coupling menus, filling, and the simplified model.

All couplings are Brownian (white-noise) and therefore characterized entirely
by a single non-negative variance strength per term, in units of an inverse
time. A menu holds intra-system strengths J_q keyed by the (even) number q of
fermion operators in the monomial, and system-environment strengths U_p keyed
by the 4-tuple p = (p1, p2, p3, p4) counting (system creations, system
annihilations, environment creations, environment annihilations).

Everything in this module is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .errors import DomainError, MenuError

CONSISTENCY_ATOL = 1e-12

CrossKey = tuple[int, int, int, int]


# ---------------------------------------------------------------------------
# Filling / chemical potential
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Filling:
    """Steady-state charge density n and the chemical potential mu it implies.

    The density is the primary field; mu = ln((1-n)/n) is derived and cached.
    Both are stored so either parametrization is free to read, and the pair is
    checked for consistency (n = 1/(e^mu + 1) to 1e-12 relative) at
    construction.
    """

    n: float
    mu: float

    def __post_init__(self):
        n, mu = self.n, self.mu
        if not (math.isfinite(n) and math.isfinite(mu)):
            raise DomainError("filling fields must be finite")
        if not 0.0 < n < 1.0:
            raise DomainError(f"density must lie in (0, 1), got {n}")
        expected = 1.0 / (math.exp(mu) + 1.0)
        if abs(n - expected) > CONSISTENCY_ATOL * max(n, expected):
            raise DomainError(
                f"inconsistent filling: n={n!r} but 1/(e^mu+1)={expected!r}"
            )

    @classmethod
    def from_mu(cls, mu: float) -> "Filling":
        if not math.isfinite(mu):
            raise DomainError(f"chemical potential must be finite, got {mu}")
        return cls(n=1.0 / (math.exp(mu) + 1.0), mu=float(mu))

    @classmethod
    def from_density(cls, n: float) -> "Filling":
        if not (isinstance(n, (int, float)) and math.isfinite(n)):
            raise DomainError(f"density must be a finite real, got {n!r}")
        if not 0.0 < n < 1.0:
            raise DomainError(f"density must lie in (0, 1), got {n}")
        return cls(n=float(n), mu=math.log((1.0 - n) / n))

    @property
    def weight(self) -> float:
        """Pauli-blockade factor n(1-n)."""
        return self.n * (1.0 - self.n)

    @property
    def a_mu(self) -> float:
        """Size-operator normalization 1/(2 cosh(mu/2)) = sqrt(n(1-n))."""
        return 1.0 / (2.0 * math.cosh(self.mu / 2.0))

    def mirrored(self) -> "Filling":
        """Particle-hole partner at density 1-n (mu -> -mu)."""
        return Filling(n=1.0 - self.n, mu=-self.mu)


def filling_from_mu(mu: float) -> Filling:
    """Density from chemical potential: n = 1/(e^mu + 1)."""
    return Filling.from_mu(mu)


def mu_from_filling(n: float) -> Filling:
    """Chemical potential from density: mu = ln((1-n)/n)."""
    return Filling.from_density(n)


# ---------------------------------------------------------------------------
# Coupling menus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MenuViolation:
    """One broken menu rule, naming the offending key."""

    key: object
    rule: str
    message: str


def _check_strength(key, value, violations):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        violations.append(MenuViolation(key, "strength-real",
                                        f"{key}: strength {value!r} is not a real number"))
        return
    if not math.isfinite(value):
        violations.append(MenuViolation(key, "strength-finite",
                                        f"{key}: strength {value!r} is not finite"))
    elif value < 0.0:
        violations.append(MenuViolation(key, "strength-nonnegative",
                                        f"{key}: strength {value} is negative"))


@dataclass(frozen=True)
class CouplingMenu:
    """Full interaction specification: intra-system {J_q} and cross {U_p}.

    Stored mappings are private copies; treat instances as immutable.
    """

    intra: Mapping[int, float] = field(default_factory=dict)
    cross: Mapping[CrossKey, float] = field(default_factory=dict)

    def __post_init__(self):
        intra = {int(q): float(j) for q, j in dict(self.intra).items()}
        cross = {}
        for p, u in dict(self.cross).items():
            key = tuple(int(x) for x in p)
            if len(key) != 4:
                raise DomainError(f"cross key {p!r} is not a 4-tuple")
            cross[key] = float(u)
        object.__setattr__(self, "intra", intra)
        object.__setattr__(self, "cross", cross)

    # -- iteration helpers ---------------------------------------------------

    def terms(self) -> Iterator[tuple[object, float, int]]:
        """Yield (key, strength, order) with order = q or p1+p2+p3+p4."""
        for q in sorted(self.intra):
            yield q, self.intra[q], q
        for p in sorted(self.cross):
            yield p, self.cross[p], sum(p)

    @property
    def is_empty(self) -> bool:
        return not self.intra and not self.cross

    def require_valid(self) -> "CouplingMenu":
        violations = validate_menu(self)
        if violations:
            raise MenuError(violations)
        return self

    # -- JSON schema ----------------------------------------------------------
    # {"intra": {"4": 1.0}, "cross": [{"p": [1, 0, 0, 1], "u": 0.5}]}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "CouplingMenu":
        if not isinstance(data, Mapping):
            raise DomainError(f"menu document must be an object, got {type(data).__name__}")
        unknown = set(data) - {"intra", "cross"}
        if unknown:
            raise DomainError(f"unknown menu fields: {sorted(unknown)}")
        try:
            intra = {int(q): float(j) for q, j in dict(data.get("intra", {})).items()}
        except (TypeError, ValueError) as exc:
            raise DomainError(f"malformed intra map: {exc}") from exc
        cross = {}
        for entry in data.get("cross", []):
            try:
                key = tuple(int(x) for x in entry["p"])
                cross[key] = float(entry["u"])
            except (TypeError, KeyError, ValueError) as exc:
                raise DomainError(f"malformed cross entry {entry!r}: {exc}") from exc
        return cls(intra=intra, cross=cross)

    def to_json_dict(self) -> dict:
        return {
            "intra": {str(q): j for q, j in sorted(self.intra.items())},
            "cross": [{"p": list(p), "u": u} for p, u in sorted(self.cross.items())],
        }


def validate_menu(menu: CouplingMenu) -> list[MenuViolation]:
    """Check every structural rule; return the (possibly empty) violation list.

    Rules for intra keys q: even integer >= 2, finite non-negative strength.
    Rules for cross keys p = (p1, p2, p3, p4): every entry >= 0, total charge
    conserved (p1 + p3 == p2 + p4), the term touches the environment
    (p3 + p4 >= 1) and the system (p1 + p2 >= 1), and at least two operators
    in total. A term acting on the environment alone would leave every
    system observable untouched, so it is rejected rather than silently
    dropped from the rate formulas.
    """
    violations: list[MenuViolation] = []
    for q, j in menu.intra.items():
        if q < 2 or q % 2 != 0:
            violations.append(MenuViolation(q, "q-even-ge-2",
                                            f"intra key {q} must be an even integer >= 2"))
        _check_strength(q, j, violations)
    for p, u in menu.cross.items():
        p1, p2, p3, p4 = p
        if min(p) < 0:
            violations.append(MenuViolation(p, "p-nonnegative",
                                            f"cross key {p} has a negative entry"))
            _check_strength(p, u, violations)
            continue
        if p1 + p3 != p2 + p4:
            violations.append(MenuViolation(
                p, "charge-conservation",
                f"cross key {p} violates charge conservation: "
                f"{p1}+{p3} != {p2}+{p4}"))
        if p3 + p4 < 1:
            violations.append(MenuViolation(p, "touches-environment",
                                            f"cross key {p} does not touch the environment"))
        if p1 + p2 < 1:
            violations.append(MenuViolation(p, "touches-system",
                                            f"cross key {p} does not touch the system"))
        if sum(p) < 2:
            violations.append(MenuViolation(p, "total-order",
                                            f"cross key {p} has fewer than two operators"))
        _check_strength(p, u, violations)
    return violations


# ---------------------------------------------------------------------------
# Simplified hopping + four-fermion model
# ---------------------------------------------------------------------------

HOPPING_KEY: CrossKey = (1, 0, 0, 1)
# Canonical representative of the four-fermion system-environment term:
# two system creations, one system annihilation, one environment annihilation.
# Any key with p1+p2 = 3, p3+p4 = 1 obeying charge conservation produces
# identical mean-field dynamics.
INTERACTION_KEY: CrossKey = (2, 1, 0, 1)


@dataclass(frozen=True)
class SimplifiedModel:
    """Hopping strength u1 plus a single four-fermion cross term u3.

    The dimensionless dissipation ratio r = u1 / (u3 n(1-n)) and the size
    growth rate kappa = u3 n(1-n) - u1 control the entire mean-field
    phenomenology of this model.
    """

    u1: float
    u3: float
    filling: Filling

    def __post_init__(self):
        if not (math.isfinite(self.u1) and self.u1 >= 0.0):
            raise DomainError(f"u1 must be finite and >= 0, got {self.u1}")
        if not (math.isfinite(self.u3) and self.u3 > 0.0):
            raise DomainError(f"u3 must be finite and > 0, got {self.u3}")

    @classmethod
    def from_ratio(cls, r: float, u3: float, filling: Filling) -> "SimplifiedModel":
        if r < 0.0:
            raise DomainError(f"dissipation ratio must be >= 0, got {r}")
        return cls(u1=r * u3 * filling.weight, u3=u3, filling=filling)

    @property
    def growth_scale(self) -> float:
        """Scrambling rate scale u3 n(1-n)."""
        return self.u3 * self.filling.weight

    @property
    def r(self) -> float:
        return self.u1 / self.growth_scale

    @property
    def kappa(self) -> float:
        return self.growth_scale - self.u1

    def menu(self) -> CouplingMenu:
        cross = {INTERACTION_KEY: self.u3}
        if self.u1 > 0.0:
            cross[HOPPING_KEY] = self.u1
        return CouplingMenu(cross=cross)
