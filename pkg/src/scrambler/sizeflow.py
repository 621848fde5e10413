"""Mean-field operator-size dynamics.

The generating function Z(nu, t) = sum_s e^{-nu s} P(s, t) of the size
distribution of an evolving single-fermion operator obeys, for any menu,

    dZ/dt = sum_q J_q w^{q/2-1} (Z^{q-1} - Z)
          + sum_p U_p w^{(sum p)/2-1} (Z^{p1+p2-1} - Z),      w = n(1-n),

with Z(0) = e^{-nu}. Everything here derives from that equation: the growth
exponent kappa (its linearization around Z = 1), the scrambling/dissipative
phase boundary, the closed-form solution for the hopping + four-fermion
model, and exact coefficient dynamics for P(s, t) obtained by expanding the
polynomial right-hand side.

Size probabilities for s <= s_max are exact under truncation: the coefficient
of x^s in Z^k only involves coefficients of order <= s, so truncation removes
tail bookkeeping, never accuracy at retained orders.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .core import CouplingMenu, Filling, SimplifiedModel
from .errors import DomainError, IntegrationFailure, NumericalError

CRITICAL_ATOL = 1e-12

_NEGATIVE_PROB_ATOL = 1e-12
_NORMALIZATION_ATOL = 1e-10


class Phase(enum.Enum):
    SCRAMBLING = "Scrambling"
    DISSIPATIVE = "Dissipative"
    CRITICAL = "Critical"


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthRate:
    """Size growth exponent kappa with per-term signed contributions."""

    kappa: float
    breakdown: dict
    classification: Phase

    def __post_init__(self):
        total = sum(self.breakdown.values())
        if abs(total - self.kappa) > 1e-12 * max(1.0, abs(self.kappa)):
            raise DomainError("growth rate does not match its breakdown")


@dataclass(frozen=True)
class SizeDistribution:
    """Discrete P(s) at one time, with explicit truncation-tail accounting.

    probs[s] for s = 0..s_max; tail_mass = 1 - sum(probs) is whatever
    probability lives beyond s_max. Tiny negative entries (solver noise,
    bounded by 1e-12) are clipped to zero on storage; anything more negative
    is an error, as is a normalization defect beyond 1e-10.
    """

    t: float
    probs: np.ndarray
    tail_mass: float
    truncation_warning: bool = False

    def __post_init__(self):
        raw = np.asarray(self.probs, dtype=float)
        if raw.min(initial=0.0) < -_NEGATIVE_PROB_ATOL:
            raise DomainError(
                f"negative probability {raw.min():.3e} at t={self.t:g}")
        if abs(raw.sum() + self.tail_mass - 1.0) > _NORMALIZATION_ATOL:
            raise DomainError(
                f"size distribution at t={self.t:g} is not normalized: "
                f"sum={raw.sum()!r}, tail={self.tail_mass!r}")
        if self.tail_mass < -_NORMALIZATION_ATOL:
            raise DomainError(f"negative tail mass {self.tail_mass:.3e}")
        object.__setattr__(self, "probs", np.clip(raw, 0.0, None))

    @property
    def s_max(self) -> int:
        return len(self.probs) - 1

    def mean_size(self) -> float:
        """Mean over the retained range (a lower bound if tail_mass > 0)."""
        return float(np.arange(len(self.probs)) @ self.probs)

    def generating(self, nu: float) -> float:
        return float(np.exp(-nu * np.arange(len(self.probs))) @ self.probs)


@dataclass(frozen=True)
class GeneratingSeries:
    """Truncated polynomial Z(nu, t) = sum_s c_s x^s with x = e^{-nu}."""

    t: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    def evaluate(self, x: float) -> float:
        return float(np.polynomial.polynomial.polyval(x, self.coeffs))

    @property
    def tail_mass(self) -> float:
        return 1.0 - float(self.coeffs.sum())


# ---------------------------------------------------------------------------
# Menu reduction shared by the rate formulas and both ODE representations
# ---------------------------------------------------------------------------

def _reduced_terms(menu: CouplingMenu, filling: Filling) -> dict[int, float]:
    """Collapse the menu to {exponent k: rate}, one entry per power Z^k.

    Intra terms enter with k = q - 1, cross terms with k = p1 + p2 - 1;
    the Pauli-blockade weight is folded into the rate.
    """
    menu.require_valid()
    w = filling.weight
    reduced: dict[int, float] = {}
    for q in sorted(menu.intra):
        k = q - 1
        reduced[k] = reduced.get(k, 0.0) + menu.intra[q] * w ** (q / 2.0 - 1.0)
    for p in sorted(menu.cross):
        k = p[0] + p[1] - 1
        rate = menu.cross[p] * w ** (sum(p) / 2.0 - 1.0)
        reduced[k] = reduced.get(k, 0.0) + rate
    return reduced


# ---------------------------------------------------------------------------
# Growth exponent and phase boundary
# ---------------------------------------------------------------------------

def lyapunov_exponent(menu: CouplingMenu, filling: Filling,
                      atol: float = CRITICAL_ATOL) -> GrowthRate:
    """kappa = sum of rate * (k - 1) over all menu terms.

    Terms with q = 2 or p1 + p2 = 2 contribute exactly zero; hopping terms
    (p1 + p2 = 1) are the only negative, dissipative contributions.
    """
    menu.require_valid()
    w = filling.weight
    breakdown = {}
    for q in sorted(menu.intra):
        breakdown[q] = menu.intra[q] * w ** (q / 2.0 - 1.0) * (q - 2)
    for p in sorted(menu.cross):
        rate = menu.cross[p] * w ** (sum(p) / 2.0 - 1.0)
        breakdown[p] = rate * (p[0] + p[1] - 2)
    kappa = sum(breakdown.values())
    if abs(kappa) <= atol:
        phase = Phase.CRITICAL
    elif kappa > 0:
        phase = Phase.SCRAMBLING
    else:
        phase = Phase.DISSIPATIVE
    return GrowthRate(kappa=kappa, breakdown=breakdown, classification=phase)


def transition_boundary(u3: float, n_grid) -> np.ndarray:
    """Critical hopping strength u1 = u3 n(1-n) along a density grid.

    Returns an array of (n, u1_critical) rows.
    """
    if not u3 > 0.0:
        raise DomainError(f"u3 must be positive, got {u3}")
    n_grid = np.asarray(n_grid, dtype=float)
    if np.any((n_grid <= 0.0) | (n_grid >= 1.0)):
        raise DomainError("every density must lie in (0, 1)")
    return np.column_stack([n_grid, u3 * n_grid * (1.0 - n_grid)])


def critical_coupling_bisect(menu: CouplingMenu, filling: Filling, key,
                             upper: float, rel_tol: float = 1e-10) -> float:
    """Solve kappa = 0 for the strength of one designated menu term.

    Bisects on [0, upper]; requires kappa to change sign across the bracket.
    `key` is either an intra q or a cross 4-tuple already present (or to be
    inserted) in the menu.
    """
    if isinstance(key, tuple):
        key = tuple(int(x) for x in key)

        def with_strength(s):
            cross = dict(menu.cross)
            cross[key] = s
            return CouplingMenu(intra=menu.intra, cross=cross)
    else:
        key = int(key)

        def with_strength(s):
            intra = dict(menu.intra)
            intra[key] = s
            return CouplingMenu(intra=intra, cross=menu.cross)

    def kappa_at(s):
        return lyapunov_exponent(with_strength(s), filling).kappa

    lo, hi = 0.0, float(upper)
    if not hi > lo:
        raise DomainError(f"bracket upper bound must be positive, got {upper}")
    f_lo, f_hi = kappa_at(lo), kappa_at(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise DomainError(
            f"kappa does not change sign on [0, {upper}]: "
            f"kappa(0)={f_lo:g}, kappa({upper})={f_hi:g}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = kappa_at(mid)
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0.0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo <= rel_tol * max(hi, 1e-300):
            break
    return 0.5 * (lo + hi)


def transition_boundary_bisect(u3: float, n_grid,
                               rel_tol: float = 1e-10) -> np.ndarray:
    """Phase boundary recovered by root-finding on kappa instead of algebra."""
    from .core import HOPPING_KEY, INTERACTION_KEY

    rows = []
    for n in np.asarray(n_grid, dtype=float):
        filling = Filling.from_density(float(n))
        menu = CouplingMenu(cross={INTERACTION_KEY: u3})
        rows.append((n, critical_coupling_bisect(
            menu, filling, HOPPING_KEY, upper=u3, rel_tol=rel_tol)))
    return np.asarray(rows)


# ---------------------------------------------------------------------------
# Generating-function ODE (scalar in x)
# ---------------------------------------------------------------------------

def integrate_generating_function(menu: CouplingMenu, filling: Filling,
                                  x_points, t_grid,
                                  rel_tol: float = 1e-9) -> np.ndarray:
    """Solve the generating-function ODE from Z(0) = x on a time grid.

    Returns Z with shape (len(x_points), len(t_grid)). All initial points are
    integrated together as one vector system (components are independent).
    Z = 1 is an exact fixed point and is preserved identically.
    """
    if not 1e-12 <= rel_tol <= 1e-3:
        raise DomainError(f"rel_tol must lie in [1e-12, 1e-3], got {rel_tol}")
    x = np.atleast_1d(np.asarray(x_points, dtype=float))
    if np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("every x point must lie in [0, 1]")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t[0] < 0.0 or (len(t) > 1 and np.any(np.diff(t) <= 0.0)):
        raise DomainError("t_grid must be increasing and start at t >= 0")

    reduced = _reduced_terms(menu, filling)
    ks = np.array(sorted(reduced), dtype=int)
    rates = np.array([reduced[int(k)] for k in ks])

    def rhs(_t, z):
        # Summed as rate * (z^k - z) per term so z = 1 annihilates each
        # contribution exactly and the fixed point survives to the last ulp.
        out = np.zeros_like(z)
        for k, rate in zip(ks, rates):
            out = out + rate * (z ** k - z)
        return out

    if t[-1] == 0.0:
        return np.tile(x[:, None], (1, len(t)))

    sol = solve_ivp(rhs, (0.0, t[-1]), x, method="DOP853", t_eval=t,
                    rtol=rel_tol, atol=rel_tol * 1e-2)
    if not sol.success:
        reached = sol.t[-1] if len(sol.t) else 0.0
        raise IntegrationFailure(
            f"generating-function integration failed: {sol.message}", reached)
    return np.clip(sol.y, 0.0, 1.0)


def mean_size(menu: CouplingMenu, filling: Filling, t: float) -> float:
    """Mean operator size e^{kappa t} of an initial single-fermion operator."""
    if t < 0.0:
        raise DomainError(f"time must be >= 0, got {t}")
    return math.exp(lyapunov_exponent(menu, filling).kappa * t)


def mean_size_from_ode(menu: CouplingMenu, filling: Filling, t_grid,
                       rel_tol: float = 1e-11, step: float = 1e-4) -> np.ndarray:
    """Mean size -dZ/dnu at nu = 0 from the integrated generating function.

    Second-order one-sided difference in nu, using Z(nu=0) = 1 exactly; this
    keeps all sample points inside the ODE's x-domain [0, 1].
    """
    x = np.array([math.exp(-step), math.exp(-2.0 * step)])
    z = integrate_generating_function(menu, filling, x, t_grid, rel_tol)
    return (3.0 - 4.0 * z[0] + z[1]) / (2.0 * step)


# ---------------------------------------------------------------------------
# Closed forms for the simplified model
# ---------------------------------------------------------------------------

def _require_consistent(r: float, kappa: float, x: float | None, t: float):
    if r < 0.0:
        raise DomainError(f"dissipation ratio must be >= 0, got {r}")
    if t < 0.0:
        raise DomainError(f"time must be >= 0, got {t}")
    if x is not None and not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    # kappa = u3 n(1-n) (1 - r): sign locked to the sign of 1 - r, and a
    # vanishing kappa can only occur at (numerically) r = 1.
    critical = abs(1.0 - r) <= CRITICAL_ATOL
    consistent = (kappa * (1.0 - r) > 0.0
                  or (critical and abs(kappa) <= 1e-9))
    if not consistent:
        raise DomainError(
            f"(r={r}, kappa={kappa}) is not realized by any simplified model")


def _critical_scale(rate_scale, what: str) -> float:
    if rate_scale is None:
        raise DomainError(
            f"{what} at the critical point r = 1 needs rate_scale = "
            "u3 * n(1-n); it is not recoverable from (r, kappa) = (1, 0)")
    if not rate_scale > 0.0:
        raise DomainError(f"rate_scale must be positive, got {rate_scale}")
    return float(rate_scale)


def closed_form_Z(r: float, kappa: float, x: float, t: float,
                  rate_scale: float | None = None) -> float:
    """Generating function of the simplified model.

        Z = 1 - (r - 1)(1 - x) / [e^{-kappa t} (r - x) - (1 - x)]

    evaluated through expm1 so the near-critical cancellation stays accurate;
    at r = 1 exactly, the kappa -> 0 limit
    Z = 1 - (1 - x) / (1 + rate_scale * t * (1 - x)) is used instead, which
    requires the rate scale u3 n(1-n) as an extra argument.
    """
    _require_consistent(r, kappa, x, t)
    if abs(1.0 - r) <= CRITICAL_ATOL:
        g = _critical_scale(rate_scale, "closed_form_Z")
        return 1.0 - (1.0 - x) / (1.0 + g * t * (1.0 - x))
    em = math.exp(-kappa * t)
    denom = (r - 1.0) * em + (1.0 - x) * math.expm1(-kappa * t)
    if abs(denom) < 1e-14 * max(1.0, abs(r - 1.0) * em):
        raise NumericalError(
            f"closed-form denominator vanished at r={r}, kappa={kappa}, "
            f"x={x}, t={t}")
    return 1.0 - (r - 1.0) * (1.0 - x) / denom


def closed_form_P(r: float, kappa: float, s: int, t: float,
                  rate_scale: float | None = None) -> float:
    """Size distribution of the simplified model.

        P(0, t)    = 1 - (1 - r) e^{kappa t} / (e^{kappa t} - r)
        P(s >= 1)  = (1 - r)^2 e^{kappa t} (e^{kappa t} - 1)^{s-1}
                     / (e^{kappa t} - r)^{s+1}

    computed in log space (the s-dependence is geometric); t = 0 reproduces
    the Kronecker delta at s = 1. The r = 1 critical limit P(0) = a/(1+a),
    P(s>=1) = a^{s-1}/(1+a)^{s+1} with a = rate_scale * t needs the rate
    scale argument, as in closed_form_Z.
    """
    if not (isinstance(s, (int, np.integer)) and s >= 0):
        raise DomainError(f"size must be a non-negative integer, got {s!r}")
    _require_consistent(r, kappa, None, t)
    if abs(1.0 - r) <= CRITICAL_ATOL:
        g = _critical_scale(rate_scale, "closed_form_P")
        a = g * t
        if s == 0:
            return a / (1.0 + a)
        if a == 0.0:
            return 1.0 if s == 1 else 0.0
        return math.exp((s - 1) * math.log(a) - (s + 1) * math.log1p(a))

    growth = math.expm1(kappa * t)            # e^{kappa t} - 1
    shifted = growth + (1.0 - r)              # e^{kappa t} - r
    if s == 0:
        return 1.0 - (1.0 - r) * math.exp(kappa * t) / shifted
    if growth == 0.0:
        return 1.0 if s == 1 else 0.0
    # growth and shifted share their sign in both phases, so the ratio of
    # |.|-powers carries no residual sign.
    log_p = (2.0 * math.log(abs(1.0 - r)) + kappa * t
             + (s - 1) * math.log(abs(growth))
             - (s + 1) * math.log(abs(shifted)))
    return math.exp(log_p)


def closed_form_distribution(r: float, kappa: float, t: float, s_max: int,
                             rate_scale: float | None = None) -> SizeDistribution:
    """Closed-form P collected into a SizeDistribution up to s_max."""
    if s_max < 1:
        raise DomainError(f"s_max must be >= 1, got {s_max}")
    probs = np.array([closed_form_P(r, kappa, s, t, rate_scale)
                      for s in range(s_max + 1)])
    return SizeDistribution(t=t, probs=probs, tail_mass=1.0 - probs.sum())


def closed_form_Z_model(model: SimplifiedModel, x: float, t: float) -> float:
    return closed_form_Z(model.r, model.kappa, x, t,
                         rate_scale=model.growth_scale)


def closed_form_P_model(model: SimplifiedModel, s: int, t: float) -> float:
    return closed_form_P(model.r, model.kappa, s, t,
                         rate_scale=model.growth_scale)


# ---------------------------------------------------------------------------
# Exact coefficient dynamics (series extraction of P(s, t))
# ---------------------------------------------------------------------------

def _truncated_power(c: np.ndarray, k: int, cache: dict) -> np.ndarray:
    if k in cache:
        return cache[k]
    if k == 0:
        out = np.zeros_like(c)
        out[0] = 1.0
    elif k == 1:
        out = c
    else:
        out = np.convolve(_truncated_power(c, k - 1, cache), c)[: len(c)]
    cache[k] = out
    return out


def _coefficient_trajectory(menu: CouplingMenu, filling: Filling, t_grid,
                            s_max: int, rel_tol: float) -> np.ndarray:
    """Integrate dc/dt = sum_k rate_k ([Z^k]_trunc - c), c_s(0) = delta_{s,1}.

    Returns coefficients with shape (len(t_grid), s_max + 1).
    """
    if s_max < 1:
        raise DomainError(f"s_max must be >= 1, got {s_max}")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t[0] < 0.0 or (len(t) > 1 and np.any(np.diff(t) <= 0.0)):
        raise DomainError("t_grid must be increasing and start at t >= 0")

    reduced = _reduced_terms(menu, filling)
    ks = sorted(reduced)
    rates = [reduced[k] for k in ks]
    total = sum(rates)

    c0 = np.zeros(s_max + 1)
    c0[1] = 1.0
    if t[-1] == 0.0 or not reduced:
        return np.tile(c0, (len(t), 1))

    def rhs(_t, c):
        cache: dict = {}
        out = -total * c
        for k, rate in zip(ks, rates):
            out = out + rate * _truncated_power(c, k, cache)
        return out

    sol = solve_ivp(rhs, (0.0, t[-1]), c0, method="DOP853", t_eval=t,
                    rtol=rel_tol, atol=1e-14)
    if not sol.success:
        reached = sol.t[-1] if len(sol.t) else 0.0
        raise IntegrationFailure(
            f"coefficient integration failed: {sol.message}", reached)
    return sol.y.T


def generating_series(menu: CouplingMenu, filling: Filling, t_grid,
                      s_max: int = 64,
                      rel_tol: float = 1e-10) -> list[GeneratingSeries]:
    """Truncated series representation of Z along a time grid."""
    coeffs = _coefficient_trajectory(menu, filling, t_grid, s_max, rel_tol)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    return [GeneratingSeries(t=float(ti), coeffs=row)
            for ti, row in zip(t, coeffs)]


def size_distribution_from_series(menu: CouplingMenu, filling: Filling,
                                  t_grid, s_max: int = 64,
                                  tail_budget: float = 1e-6,
                                  rel_tol: float = 1e-10) -> list[SizeDistribution]:
    """P(s, t) = c_s(t) from the coefficient dynamics, per grid time.

    Entries with s <= s_max are exact up to integrator tolerance; mass that
    has flowed beyond s_max is reported as tail_mass, and distributions whose
    tail exceeds tail_budget carry truncation_warning = True.
    """
    coeffs = _coefficient_trajectory(menu, filling, t_grid, s_max, rel_tol)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    out = []
    for ti, row in zip(t, coeffs):
        tail = 1.0 - row.sum()
        out.append(SizeDistribution(
            t=float(ti), probs=row, tail_mass=tail,
            truncation_warning=bool(tail > tail_budget)))
    return out
