"""Variational quantum relative entropies: measured, Umegaki and sandwiched
Renyi divergences, recovery-map entropies with weak-duality certificates, and
a matrix-inequality lab."""

from .divergences import (
    ClassicalPair,
    Measurement,
    entropy,
    fidelity,
    kl,
    max_divergence,
    measured_value,
    renyi_classical,
    sandwiched_d,
    sandwiched_q,
    umegaki,
)
from .errors import (
    ConvergenceError,
    DomainError,
    FeasibilityError,
    QdivError,
    ShapeError,
)
from .inequalities import (
    GapReport,
    ViolationCertificate,
    alpha_sweep,
    alt_gap,
    dp_violation_search,
    golden_thompson_gap,
    trace_inequality_trials,
)
from .oracle import (
    MeasurementSearchResult,
    povm_audit,
    povm_sample,
    projective_grid_qubit,
    projective_multistart,
)
from .recovery import (
    DualCertificate,
    RecoveryProblem,
    cmi,
    cmi_bound_check,
    flipped_recovery,
    measured_recovery_dual_eval,
    measured_recovery_dual_solve,
    optimize_recovery_primal,
    recovery_dual_solve,
    renyi_measured_recovery,
    superadditivity_check,
    tensor_problem,
)
from .solvers import (
    DEFAULT_CONFIG,
    DivergenceReport,
    SolverConfig,
    alberti_form_q,
    extract_optimal_measurement,
    frank_lieb_q,
    measured_rel_entropy,
    measured_renyi_q,
    petz_umegaki_variational,
)
from .states import (
    ChoiState,
    DensityOperator,
    HermitianOperator,
    PsdOperator,
    apply_choi,
    choi_from_kraus,
    commutator_norm,
    matrix_from_json,
    matrix_to_json,
    purify,
    random_density,
    random_hermitian,
    random_unitary,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ClassicalPair", "Measurement", "entropy", "fidelity", "kl",
    "max_divergence", "measured_value", "renyi_classical", "sandwiched_d",
    "sandwiched_q", "umegaki",
    "QdivError", "ShapeError", "DomainError", "FeasibilityError",
    "ConvergenceError",
    "GapReport", "ViolationCertificate", "alpha_sweep", "alt_gap",
    "dp_violation_search", "golden_thompson_gap", "trace_inequality_trials",
    "MeasurementSearchResult", "povm_audit", "povm_sample",
    "projective_grid_qubit", "projective_multistart",
    "DualCertificate", "RecoveryProblem", "cmi", "cmi_bound_check",
    "flipped_recovery", "measured_recovery_dual_eval",
    "measured_recovery_dual_solve", "optimize_recovery_primal",
    "recovery_dual_solve", "renyi_measured_recovery",
    "superadditivity_check", "tensor_problem",
    "DEFAULT_CONFIG", "DivergenceReport", "SolverConfig", "alberti_form_q",
    "extract_optimal_measurement", "frank_lieb_q", "measured_rel_entropy",
    "measured_renyi_q", "petz_umegaki_variational",
    "ChoiState", "DensityOperator", "HermitianOperator", "PsdOperator",
    "apply_choi", "choi_from_kraus", "commutator_norm", "matrix_from_json",
    "matrix_to_json", "purify", "random_density", "random_hermitian",
    "random_unitary",
]
