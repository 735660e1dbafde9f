"""Weak-measurement purification of a two-qubit system probed on one side."""

__version__ = "0.1.0"

from .ensemble import (
    EnsembleConfig,
    EnsembleStats,
    determinism_report,
    initial_slope,
    run_ensemble,
)
from .linalg3 import Svd3, cross, orthonormal_complement, plane_projector, svd3
from .pauli import (
    ProjectiveOutcome,
    StateValidationError,
    TwoQubitState,
    correlation_matrix,
    from_density_matrix,
    preset,
    projective_measure,
    purity,
    reduced_bloch,
    to_density_matrix,
    validate,
)
from .scan import RateMap, argmax_axis, rate_map
from .sme import (
    NumericalGuardError,
    SimParams,
    TrajectoryRecord,
    simulate_trajectory,
    step_dense,
    step_pauli,
)
from .strategies import (
    DegenerateStateError,
    StrategyConfig,
    parse_strategy,
    rate_alice,
    rate_bob,
    select_axis_along_bloch,
    select_axis_bob_deterministic,
    select_axis_bob_optimal,
    select_axis_jacobs_alice,
    select_axis_simultaneous,
)

__all__ = [
    "Svd3",
    "cross",
    "orthonormal_complement",
    "plane_projector",
    "svd3",
    "ProjectiveOutcome",
    "StateValidationError",
    "TwoQubitState",
    "correlation_matrix",
    "from_density_matrix",
    "preset",
    "projective_measure",
    "purity",
    "reduced_bloch",
    "to_density_matrix",
    "validate",
    "NumericalGuardError",
    "SimParams",
    "TrajectoryRecord",
    "simulate_trajectory",
    "step_dense",
    "step_pauli",
    "DegenerateStateError",
    "StrategyConfig",
    "parse_strategy",
    "rate_alice",
    "rate_bob",
    "select_axis_along_bloch",
    "select_axis_bob_deterministic",
    "select_axis_bob_optimal",
    "select_axis_jacobs_alice",
    "select_axis_simultaneous",
    "EnsembleConfig",
    "EnsembleStats",
    "determinism_report",
    "initial_slope",
    "run_ensemble",
    "RateMap",
    "argmax_axis",
    "rate_map",
]
