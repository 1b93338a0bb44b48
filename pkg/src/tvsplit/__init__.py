"""Online convex optimization under time drift via operator splitting.

The package solves sequences of strongly convex composite problems
``min_x f(x; t_k) + g(x)`` that are sampled from a continuously varying cost.
Between samples a prediction phase runs splitting steps on a first-order
model of the upcoming cost; once the new cost is observed, a correction
phase runs splitting steps on it directly. Forward-backward and
Douglas-Rachford splittings are supported, with closed-form contraction
factors, a tracking condition, error-recursion coefficients, and
sampling-period bounds, plus a leader-following formation benchmark that
exercises all of it end to end.

Hot iteration kernels run through a compiled extension when it is available
and fall back to pure numpy otherwise; set ``TVSPLIT_PURE_PYTHON=1`` to force
the fallback. ``tvsplit.kernels.backend_name()`` reports the active choice.
"""

from .analysis import (
    ConvergenceReport,
    EtaCoefficients,
    LipschitzTestReport,
    Regime,
    TrackingProblem,
    convergence_radius,
    convergence_report,
    error_envelope,
    eta_linear,
    eta_quadratic,
    max_sampling_period,
    sinusoid_tracking_problem,
    solution_map_lipschitz_test,
    tracking_condition,
)
from .benchmark import (
    FormationSpec,
    LissajousSpec,
    NoiseRule,
    SweepResult,
    TrajectoryRecord,
    build_step_cost,
    formation_constraints,
    formation_pose,
    leader_position,
    oracle_solution,
    run_benchmark,
    sample_measurements,
    sweep_ts,
)
from .cli import ConfigError, main
from .costs import (
    AffineProjection,
    DerivativeBounds,
    NonsmoothCost,
    QuadraticCost,
    SmoothCost,
    affine_constraint_cost,
    build_quadratic,
    curvature_range,
    l1_cost,
    prox_affine_indicator,
    prox_l1,
    prox_quadratic,
    validate_curvature,
    zero_cost,
)
from .engine import (
    DerivativeMode,
    OnlineState,
    PCConfig,
    SolverError,
    StepRecord,
    backward_difference_grad_time,
    build_prediction_cost,
    correct,
    predict,
    run_online,
    run_phase,
)
from .kernels import backend_name
from .splitting import (
    Method,
    RateEstimate,
    SplitConfig,
    SplitState,
    balanced_step,
    banach_picard,
    contraction_dr,
    contraction_fb,
    dr_step,
    fb_step,
    fixed_point_residual,
)

__version__ = "0.1.0"

__all__ = [
    "AffineProjection",
    "ConfigError",
    "ConvergenceReport",
    "DerivativeBounds",
    "DerivativeMode",
    "EtaCoefficients",
    "FormationSpec",
    "LipschitzTestReport",
    "LissajousSpec",
    "Method",
    "NoiseRule",
    "NonsmoothCost",
    "OnlineState",
    "PCConfig",
    "QuadraticCost",
    "RateEstimate",
    "Regime",
    "SmoothCost",
    "SolverError",
    "SplitConfig",
    "SplitState",
    "StepRecord",
    "SweepResult",
    "TrackingProblem",
    "TrajectoryRecord",
    "affine_constraint_cost",
    "backend_name",
    "backward_difference_grad_time",
    "balanced_step",
    "banach_picard",
    "build_prediction_cost",
    "build_quadratic",
    "build_step_cost",
    "contraction_dr",
    "contraction_fb",
    "convergence_radius",
    "convergence_report",
    "correct",
    "curvature_range",
    "dr_step",
    "error_envelope",
    "eta_linear",
    "eta_quadratic",
    "fb_step",
    "fixed_point_residual",
    "formation_constraints",
    "formation_pose",
    "l1_cost",
    "leader_position",
    "main",
    "max_sampling_period",
    "oracle_solution",
    "predict",
    "prox_affine_indicator",
    "prox_l1",
    "prox_quadratic",
    "run_benchmark",
    "run_online",
    "run_phase",
    "sample_measurements",
    "sinusoid_tracking_problem",
    "solution_map_lipschitz_test",
    "sweep_ts",
    "tracking_condition",
    "validate_curvature",
    "zero_cost",
]
