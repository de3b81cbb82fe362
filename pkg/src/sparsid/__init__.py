"""Sparse identification of rational transfer functions from a few
frequency samples, using a concatenated FIR + Takenaka-Malmquist
dictionary and l1 minimization."""

__version__ = "0.1.0"

from .rational_basis import (  # noqa: F401
    BasisCoherence,
    ImpulseTable,
    PoleSequence,
    SparsityReport,
    UniquenessCheck,
    basis_coherence,
    default_truncation,
    fir_eval,
    impulse_table,
    impulse_table_to_csv,
    sparsity_report,
    tm_eval,
    tm_impulse_closed_form,
    tm_impulse_filter,
    uniqueness_check,
)
from .sensing import (  # noqa: F401
    CompositeMatrix,
    FrequencyGrid,
    GramDiagnostics,
    MeasurementBound,
    RealSplitSystem,
    SampleSet,
    block_coherence,
    build_composite,
    build_grid,
    dictionary_matrix,
    draw_sample_set,
    gram_diagnostics,
    make_sample_set,
    matrix_coherence,
    measurement_bound,
    real_split,
    sample_rows,
    upper_circle_indices,
)
from .l1_solver import (  # noqa: F401
    L1Problem,
    OracleResult,
    SolverResult,
    Tolerances,
    l0_oracle,
    solve_bp,
    solve_bpdn,
)
from .identification import (  # noqa: F401
    CoefficientVector,
    GroundTruth,
    PoleSpec,
    RecoveryStats,
    TrialRecord,
    cluster_coefficients,
    generate_ground_truth,
    h2_error,
    h2_error_to_function,
    identify,
    measure,
    reconstruction_order,
    recovery_stats,
    transfer_values,
)
from .experiments import (  # noqa: F401
    ConfigError,
    ExperimentConfig,
    PRESET_NAMES,
    ReportBundle,
    TruthSpec,
    diagnose,
    load_config,
    preset,
    report_from_trials,
    run_config,
    run_preset,
)
