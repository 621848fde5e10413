"""Late-time operator-size statistics of the simplified model.

Once the exponential growth factor e^{kappa t} becomes comparable to the
number of system modes, the early-time mean-field solution breaks down and
the resummed collective-mode (scramblon) description takes over. For the
hopping + four-fermion model the vertex generating function is

    f(x) = sqrt(n(1-n)) [r + (1-r)/(1+x)],
    h(y) = sqrt(n(1-n)) [(1-r) e^{-y} + r delta(y)],   f(x) = L[h](x),

and the continuum size distribution on sigma = s/N acquires a singular
weight r at sigma = 0 plus a regular density supported on (0, s_sc] with
s_sc = 4 n(1-n) (1-r).

Raw vertex values and the propagator normalization C are convention
dependent (C -> a^2 C, vertex^m -> a^m vertex^m leaves observables fixed);
only S, the distribution, and s_sc are contract-bound outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, QuadratureFailure

_FACTORIAL_LOG_SWITCH = 20
_MAX_EXACT_FACTORIAL = 170  # largest m with m! representable in float64


@dataclass(frozen=True)
class ScramblonParams:
    """Parameters of the late-time theory for the simplified model.

    r in [0, 1) (the theory lives in the scrambling phase), density n,
    number of system modes n_modes, and growth exponent kappa > 0. The
    propagator normalization C = 4 (1-r) n(1-n) n_modes fixes
    lambda(t) = e^{kappa t} / C.
    """

    r: float
    n: float
    n_modes: int
    kappa: float

    def __post_init__(self):
        if not 0.0 <= self.r < 1.0:
            raise DomainError(f"r must lie in [0, 1), got {self.r}")
        if not 0.0 < self.n < 1.0:
            raise DomainError(f"density must lie in (0, 1), got {self.n}")
        if not self.n_modes >= 1:
            raise DomainError(f"n_modes must be >= 1, got {self.n_modes}")
        if not self.kappa > 0.0:
            raise DomainError(f"kappa must be > 0, got {self.kappa}")

    @property
    def weight(self) -> float:
        return self.n * (1.0 - self.n)

    @property
    def a_mu(self) -> float:
        """Vertex normalization sqrt(n(1-n))."""
        return math.sqrt(self.weight)

    @property
    def coupling(self) -> float:
        """Propagator normalization C = 4 (1-r) n(1-n) n_modes."""
        return 4.0 * (1.0 - self.r) * self.weight * self.n_modes

    @property
    def s_sc(self) -> float:
        """Saturation value of the continuum size sigma = s / n_modes."""
        return 4.0 * self.weight * (1.0 - self.r)

    def lam(self, t: float) -> float:
        """Propagator amplitude lambda(t) = e^{kappa t} / C, in log space."""
        if t < 0.0:
            raise DomainError(f"time must be >= 0, got {t}")
        return math.exp(self.kappa * t - math.log(self.coupling))


def saturation_size(params: ScramblonParams) -> float:
    """s_sc = 4 n(1-n)(1-r): late-time size per mode of a scrambled operator."""
    return params.s_sc


def vertex_factor(params: ScramblonParams, m: int) -> float:
    """Scattering vertex with m scramblon legs.

    vertex(0) = sqrt(n(1-n)); vertex(m >= 1) = sqrt(n(1-n)) (1-r) m!.
    The factorial is evaluated in log space beyond m = 20; past float range
    (m > 170) use vertex_factor_log.
    """
    if m < 0:
        raise DomainError(f"scramblon count must be >= 0, got {m}")
    if m > _MAX_EXACT_FACTORIAL:
        raise OverflowError(
            f"vertex factor for m={m} exceeds float range; "
            "use vertex_factor_log")
    if m == 0:
        return params.a_mu
    if m <= _FACTORIAL_LOG_SWITCH:
        return params.a_mu * (1.0 - params.r) * math.factorial(m)
    log_abs, sign = vertex_factor_log(params, m)
    return sign * math.exp(log_abs)


def vertex_factor_log(params: ScramblonParams, m: int) -> tuple[float, int]:
    """(log |vertex(m)|, sign); valid for arbitrarily large m."""
    if m < 0:
        raise DomainError(f"scramblon count must be >= 0, got {m}")
    if m == 0:
        return math.log(params.a_mu), 1
    if params.r == 1.0:  # unreachable by construction, kept for clarity
        return -math.inf, 0
    base = math.log(params.a_mu) + math.log(1.0 - params.r)
    return base + math.lgamma(m + 1), 1


def f_function(params: ScramblonParams, x: float) -> float:
    """Vertex generating function f(x) = sqrt(n(1-n)) [r + (1-r)/(1+x)]."""
    if x < 0.0:
        raise DomainError(f"f is defined for x >= 0, got {x}")
    if math.isinf(x):
        return params.a_mu * params.r
    return params.a_mu * (params.r + (1.0 - params.r) / (1.0 + x))


def h_function(params: ScramblonParams, y: float) -> tuple[float, float]:
    """Inverse Laplace transform of f: (regular part at y, weight of delta(y)).

    regular(y) = sqrt(n(1-n)) (1-r) e^{-y}; the singular weight
    sqrt(n(1-n)) r multiplies delta(y) and is reported separately.
    """
    if y < 0.0:
        raise DomainError(f"h is defined for y >= 0, got {y}")
    regular = params.a_mu * (1.0 - params.r) * math.exp(-y)
    return regular, params.a_mu * params.r


def _resolve_lambda(params: ScramblonParams, t: float | None,
                    lam: float | None) -> float:
    if (t is None) == (lam is None):
        raise DomainError("pass exactly one of t or lam")
    if lam is not None:
        if not lam > 0.0:
            raise DomainError(f"lambda must be > 0, got {lam}")
        return float(lam)
    return params.lam(t)


def late_time_generating(params: ScramblonParams, v: float,
                         t: float | None = None, *,
                         lam: float | None = None,
                         abs_tol: float = 1e-10) -> float:
    """Resummed generating function S(v, t) of the continuum distribution.

        S = int_0^inf dy [h(y)/sqrt(n(1-n))] exp(-4 A v (sqrt(n(1-n)) - f(lam y)))

    The delta part of h contributes exactly r (the exponent vanishes at
    y = 0 because f(0) = sqrt(n(1-n))); the regular part is integrated
    adaptively after the substitution y = -ln u, u in (0, 1]. The lambda ->
    infinity limit can be probed by passing lam directly.
    """
    if v < 0.0:
        raise DomainError(f"v must be >= 0, got {v}")
    lam_val = _resolve_lambda(params, t, lam)
    r, a = params.r, params.a_mu
    four_av = 4.0 * a * v

    def integrand(u):
        y = -math.log(u)
        x = lam_val * y
        return (1.0 - r) * math.exp(-four_av * (a - f_function(params, x)))

    value, err = quad(integrand, 0.0, 1.0, epsabs=abs_tol, epsrel=1e-12,
                      limit=200)
    if err > max(abs_tol * 10.0, 1e-9):
        raise QuadratureFailure(
            "late-time generating function quadrature did not converge",
            r + value, err)
    return r + value


@dataclass(frozen=True)
class ContinuumSizeDistribution:
    """Singular weight at sigma = 0 plus regular density on (0, s_sc]."""

    sigma: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    singular_weight: float
    lam: float
    s_sc: float
    endpoint_note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "density", np.asarray(self.density, dtype=float))


def continuum_density_at(params: ScramblonParams, sigma: float,
                         lam: float) -> float:
    """Regular density  s_sc (1-r) e^{sigma / (lam (sigma - s_sc))}
                        / (lam (sigma - s_sc)^2),  supported on [0, s_sc).

    Evaluated through its logarithm: approaching s_sc from below the
    essential singularity e^{-sigma/(lam (s_sc - sigma))} beats the double
    pole, so the one-sided limit is 0, which is also the value returned at
    sigma = s_sc and beyond.
    """
    s_sc = params.s_sc
    if sigma < 0.0 or sigma >= s_sc:
        return 0.0
    gap = s_sc - sigma
    log_density = (math.log(s_sc * (1.0 - params.r)) - math.log(lam)
                   - 2.0 * math.log(gap) - sigma / (lam * gap))
    # The exponent -sigma/(lam gap) -> -inf as gap -> 0 dominates the
    # -2 log(gap) pole; exp underflows cleanly to 0.
    if log_density < -745.0:
        return 0.0
    return math.exp(log_density)


def continuum_distribution(params: ScramblonParams, sigma_grid,
                           t: float | None = None, *,
                           lam: float | None = None) -> ContinuumSizeDistribution:
    """Evaluate the continuum size distribution on a grid of sigma = s/N."""
    lam_val = _resolve_lambda(params, t, lam)
    sigma = np.asarray(sigma_grid, dtype=float)
    if np.any(sigma < 0.0) or np.any(sigma > 1.0):
        raise DomainError("sigma grid must lie in [0, 1]")
    density = np.array([continuum_density_at(params, float(s), lam_val)
                        for s in sigma])
    return ContinuumSizeDistribution(
        sigma=sigma, density=density, singular_weight=params.r,
        lam=lam_val, s_sc=params.s_sc,
        endpoint_note=("density -> 0 as sigma -> s_sc^- (essential "
                       "singularity dominates the double pole); values at "
                       "sigma >= s_sc are exactly 0"))


def continuum_normalization(params: ScramblonParams, lam: float,
                            abs_tol: float = 1e-10) -> float:
    """Adaptive quadrature of singular weight + integral of the density.

    Breakpoints are clustered geometrically near the s_sc endpoint where the
    density concentrates at large lambda.
    """
    s_sc = params.s_sc

    def dens(sigma):
        return continuum_density_at(params, sigma, lam)

    points = [p for p in (s_sc * (1.0 - 10.0 ** (-j) / max(lam, 1.0))
                          for j in range(-2, 10)) if 0.0 < p < s_sc]
    value, err = quad(dens, 0.0, s_sc, points=points or None,
                      epsabs=abs_tol, epsrel=1e-12, limit=400)
    if err > max(abs_tol * 10.0, 1e-8):
        raise QuadratureFailure("continuum normalization quadrature did not "
                                "converge", params.r + value, err)
    return params.r + value


def continuum_mean(params: ScramblonParams, lam: float,
                   abs_tol: float = 1e-10) -> float:
    """Mean of the regular component, normalized by its weight (1 - r).

    Tends to s_sc as lambda -> infinity (the scrambled component collapses
    onto a delta function at the saturation size).
    """
    s_sc = params.s_sc

    def integrand(sigma):
        return sigma * continuum_density_at(params, sigma, lam)

    points = [p for p in (s_sc * (1.0 - 10.0 ** (-j) / max(lam, 1.0))
                          for j in range(-2, 10)) if 0.0 < p < s_sc]
    value, err = quad(integrand, 0.0, s_sc, points=points or None,
                      epsabs=abs_tol, epsrel=1e-12, limit=400)
    if err > max(abs_tol * 10.0, 1e-8):
        raise QuadratureFailure("continuum mean quadrature did not converge",
                                value, err)
    return value / (1.0 - params.r)
