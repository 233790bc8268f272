"""Heralded Bell-state preparation of two dissipative qubits coupled to
a one-dimensional waveguide.

The package models two two-level emitters a fixed distance apart in a
waveguide, driven by classical light from one side.  It provides the
deterministic master equation, three stochastic unravelings of it
(photon counting, a strong-drive diffusive hybrid, and a
finite-efficiency stochastic master equation), per-trajectory
entanglement measures, and the reflected-light intensity correlation.
"""

from .ensemble import (
    CONSISTENCY_ATOL,
    SUBBATCH,
    ConsistencyReport,
    EnsembleStats,
    RunConfig,
    consistency_check,
    effective_workers,
    emit_csv,
    parse_config,
    parse_config_values,
    run_ensemble,
)
from .entangle import (
    EE,
    GG,
    MINUS_I,
    PLUS_I,
    POP_BASIS,
    bell_fidelity,
    binary_entropy,
    concurrence,
    entropy,
    eof,
    eof_from_concurrence,
    populations,
)
from .errors import (
    BellheraldError,
    CheckFailure,
    ConfigError,
    GuardError,
    PreconditionError,
)
from .lindblad import (
    G2Curve,
    dt_max,
    g2_left,
    integrate_me,
    liouvillian_apply,
    steady_state,
    superoperator_matrix,
)
from .model import (
    DEFAULT_COUPLING,
    DerivedRates,
    ModelOperators,
    ModelParams,
    build_operators,
    derive_rates,
)
from .trajectories import (
    CHUNK,
    JumpEvent,
    NoiseRecord,
    TrajectoryRecord,
    hqq_suppression_check,
    run_diffusive_sse,
    run_jump_sse,
    run_sme,
    step_diffusive_sse,
    step_jump_sse,
    step_sme,
    trajectory_rng,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "BellheraldError",
    "ConfigError",
    "GuardError",
    "CheckFailure",
    "PreconditionError",
    # model
    "ModelParams",
    "DerivedRates",
    "ModelOperators",
    "DEFAULT_COUPLING",
    "derive_rates",
    "build_operators",
    # deterministic evolution
    "dt_max",
    "liouvillian_apply",
    "superoperator_matrix",
    "integrate_me",
    "steady_state",
    "G2Curve",
    "g2_left",
    # entanglement
    "EE",
    "GG",
    "PLUS_I",
    "MINUS_I",
    "POP_BASIS",
    "binary_entropy",
    "entropy",
    "concurrence",
    "eof",
    "eof_from_concurrence",
    "populations",
    "bell_fidelity",
    # trajectories
    "CHUNK",
    "JumpEvent",
    "NoiseRecord",
    "TrajectoryRecord",
    "trajectory_rng",
    "step_jump_sse",
    "step_diffusive_sse",
    "step_sme",
    "run_jump_sse",
    "run_diffusive_sse",
    "run_sme",
    "hqq_suppression_check",
    # ensembles
    "SUBBATCH",
    "CONSISTENCY_ATOL",
    "RunConfig",
    "EnsembleStats",
    "ConsistencyReport",
    "parse_config",
    "parse_config_values",
    "effective_workers",
    "run_ensemble",
    "consistency_check",
    "emit_csv",
]
