"""Operator-size dynamics of an open, charge-conserving Brownian SYK model.

Mean-field analytics (quasiparticle rate, generating-function ODE, closed
forms, late-time scramblon statistics) cross-validated against an exact
small-system Monte Carlo oracle, with a CSV/JSON-emitting CLI.
"""

from .core import (CouplingMenu, Filling, MenuViolation, SimplifiedModel,
                   filling_from_mu, mu_from_filling, validate_menu)
from .errors import (ConfigError, DomainError, IntegrationFailure, MenuError,
                     NumericalError, QuadratureFailure, ScramblerError,
                     UnsupportedModelError)
from .greens import (GreensMatrix, QuasiparticleRate, advanced_greens,
                     greens_matrix, quasiparticle_rate, retarded_greens)
from .scramblon import (ContinuumSizeDistribution, ScramblonParams,
                        continuum_distribution, f_function, h_function,
                        late_time_generating, saturation_size, vertex_factor,
                        vertex_factor_log)
from .sizeflow import (GeneratingSeries, GrowthRate, Phase, SizeDistribution,
                       closed_form_P, closed_form_Z, closed_form_distribution,
                       critical_coupling_bisect, integrate_generating_function,
                       lyapunov_exponent, mean_size, mean_size_from_ode,
                       size_distribution_from_series, transition_boundary,
                       transition_boundary_bisect)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContinuumSizeDistribution",
    "CouplingMenu",
    "DomainError",
    "Filling",
    "GeneratingSeries",
    "GreensMatrix",
    "GrowthRate",
    "IntegrationFailure",
    "MenuError",
    "MenuViolation",
    "NumericalError",
    "Phase",
    "QuadratureFailure",
    "QuasiparticleRate",
    "ScramblerError",
    "ScramblonParams",
    "SimplifiedModel",
    "SizeDistribution",
    "UnsupportedModelError",
    "advanced_greens",
    "closed_form_P",
    "closed_form_Z",
    "closed_form_distribution",
    "continuum_distribution",
    "critical_coupling_bisect",
    "f_function",
    "filling_from_mu",
    "greens_matrix",
    "h_function",
    "integrate_generating_function",
    "late_time_generating",
    "lyapunov_exponent",
    "mean_size",
    "mean_size_from_ode",
    "mu_from_filling",
    "quasiparticle_rate",
    "retarded_greens",
    "saturation_size",
    "size_distribution_from_series",
    "transition_boundary",
    "transition_boundary_bisect",
    "validate_menu",
    "vertex_factor",
    "vertex_factor_log",
    "__version__",
]
