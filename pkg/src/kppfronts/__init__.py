"""Fisher-KPP front toolkit: profiles, measure superpositions, verification."""

from .errors import (
    AccuracyError,
    ConfigError,
    DomainError,
    InsufficientDataError,
    InvalidInput,
    KPPError,
    NoFrontError,
    NotBracketedError,
    NumericError,
    RangeError,
    ResolutionError,
    SchemeInconsistencyError,
    TrackingLostError,
)
from .nonlinearity import (
    Nonlinearity,
    ValidationReport,
    critical_speed,
    from_table,
    homogeneous_solution,
    make_nonlinearity,
    named,
    validate_kpp,
)
from .profiles import (
    FrontProfile,
    ProfileFamily,
    decay_rate,
    evaluate,
    load_profile,
    profile_diagnostics,
    rate_to_speed,
    save_profile,
    solve_profile,
    suggest_range,
    uniform_decay_constant,
)
from .pde import (
    Coefficients,
    ComparisonReport,
    Field,
    Grid1D,
    Observer,
    SolverConfig,
    comparison_check,
    default_dt,
    evolve,
    load_field,
    save_field,
    step,
)
from .measures import (
    DensityPiece,
    LadderReport,
    SpeedMeasure,
    approximate_superposition,
    boundary_clamps,
    centered_grid,
    classify,
    initial_condition,
    measure_from_spec,
    sandwich_bounds,
    scan_front_position,
    speed_measure,
    support_info,
)
from .analysis import (
    FrontTrace,
    FrontTracker,
    SpeedEstimates,
    SpeedFit,
    TailDecay,
    interface_width,
    is_transition_front,
    level_position,
    oscillation_bound,
    profile_convergence_error,
    read_trace_csv,
    speed_estimates,
    tail_decay_rate,
    write_trace_csv,
)
from .steepness import (
    IntersectionSeries,
    SandwichReport,
    anchors_at_levels,
    critical_steepest_check,
    default_sandwich_tol,
    intersection_monotonicity,
    sign_changes,
    steepness_check,
)

__version__ = "0.1.0"
