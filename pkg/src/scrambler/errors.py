"""Exception taxonomy shared across the package.

Validation problems (bad inputs, inconsistent model data) raise DomainError
subclasses; failures of numerical procedures raise NumericalError subclasses.
The CLI maps the former to exit code 1 and the latter to exit code 2.
"""

from __future__ import annotations


class ScramblerError(Exception):
    """Base class for all package errors."""


class DomainError(ScramblerError, ValueError):
    """Input outside the mathematical/physical domain of an operation."""


class MenuError(DomainError):
    """A coupling menu violates its structural constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(v.message for v in self.violations)
        super().__init__(f"invalid coupling menu: {lines}")


class ConfigError(DomainError):
    """A run configuration is malformed or exceeds resource bounds."""


class UnsupportedModelError(DomainError):
    """Operation only defined for the simplified hopping+interaction model."""


class NumericalError(ScramblerError, RuntimeError):
    """A numerical procedure failed to reach its accuracy contract."""


class IntegrationFailure(NumericalError):
    """ODE integration aborted (e.g. step-size underflow)."""

    def __init__(self, message, t_reached):
        self.t_reached = float(t_reached)
        super().__init__(f"{message} (time reached: {self.t_reached:g})")


class QuadratureFailure(NumericalError):
    """Adaptive quadrature did not converge to the requested tolerance."""

    def __init__(self, message, estimate, error_bound):
        self.estimate = float(estimate)
        self.error_bound = float(error_bound)
        super().__init__(
            f"{message} (estimate {self.estimate:.12g}, "
            f"error bound {self.error_bound:.3g})"
        )


class InternalConsistencyError(ScramblerError, RuntimeError):
    """An internal construction failed its own exactness audit."""
