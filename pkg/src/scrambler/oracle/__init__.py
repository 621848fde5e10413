"""Exact small-system realization of the model on the doubled register."""

from .evolution import (EvolutionResult, OperatorState, OracleConfig,
                        evolve_operator_state, initial_operator_matrix,
                        parse_initial_operator, prepare_initial_state,
                        size_distribution_oracle)
from .fermions import (ModeLayout, ModeOperators, apply_monomial,
                       build_mode_operators, mode_matrix)
from .hamiltonian import (HamiltonianSampler, TermSpec, enumerate_terms,
                          total_charge_matrix)
from .montecarlo import (ComparisonReport, DisorderAverage, RealizationResult,
                         aggregate, compare_to_meanfield, disorder_average,
                         run_realization, realization_streams)
from .sizeops import (SizeSpectrum, build_size_spectrum, operator_from_state,
                      reference_state, size_operator_matrix,
                      state_from_operator)

__all__ = [
    "ComparisonReport",
    "DisorderAverage",
    "EvolutionResult",
    "HamiltonianSampler",
    "ModeLayout",
    "ModeOperators",
    "OperatorState",
    "OracleConfig",
    "RealizationResult",
    "SizeSpectrum",
    "TermSpec",
    "aggregate",
    "apply_monomial",
    "build_mode_operators",
    "build_size_spectrum",
    "compare_to_meanfield",
    "disorder_average",
    "enumerate_terms",
    "evolve_operator_state",
    "initial_operator_matrix",
    "mode_matrix",
    "operator_from_state",
    "parse_initial_operator",
    "prepare_initial_state",
    "realization_streams",
    "reference_state",
    "run_realization",
    "size_distribution_oracle",
    "size_operator_matrix",
    "state_from_operator",
    "total_charge_matrix",
]
