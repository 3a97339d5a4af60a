"""Nonlinear forecast reconciliation.

Projects point forecasts onto a nonlinear constraint manifold in a weighted
Euclidean norm, evaluates curvature-based sufficient conditions for the
projection to reduce forecast error, estimates the reduction probability
from predictive samples with exact confidence bounds, and runs randomized
simulation studies of the whole pipeline.
"""

from .errors import (
    ApplicabilityError,
    DegeneratePointError,
    EvaluationError,
    NlreconError,
    ProjectionError,
    SingularConstraintError,
    SingularKKTError,
    SolverQualityError,
)
from .expressions import ExpressionError, compile_expression
from .manifolds import (
    Constraint,
    Convexity,
    GraphFn,
    GraphLift,
    ManifoldSpec,
    eval_f,
    eval_hessians,
    eval_jacobian,
    load_manifold_config,
    registry_get,
    registry_names,
    spec_from_config,
    spec_from_graphs,
)
from .geometry import (
    CurvatureReport,
    curvature_report,
    normal_correction,
    restricted_hessian,
    second_fundamental_form,
    tangent_basis,
)
from .projection import (
    NEWTON_AS_PRINTED,
    NEWTON_FULL,
    FaseResult,
    GraphMap,
    ProjectionResult,
    SolverOptions,
    batch_project,
    fase_reconcile,
    project,
)
from .guarantees import (
    GUARANTEED_REDUCTION,
    NOT_APPLICABLE,
    GuaranteeVerdict,
    ReductionEstimate,
    clopper_pearson,
    corollary1_check,
    halfspace_test,
    theorem1_check,
    theorem2b_check,
    theorem3_estimate,
)
from .forecasting import (
    FORECASTERS,
    LinearARForecaster,
    PersistenceForecaster,
    bootstrap_predictive,
    fit_forecaster,
)
from .experiments import (
    SCHEMA_VERSION,
    ApplicabilityRow,
    DgpConfig,
    StrategyOutcome,
    StudyConfig,
    StudyRecord,
    StudyReport,
    applicability_study,
    apply_strategy,
    binary_coverage,
    calibration_curve,
    format_number,
    frechet_mean_euclidean,
    generate_dataset,
    run_study,
    study_config_from_dict,
    write_applicability_csv,
    write_study_outputs,
)

__version__ = "0.1.0"

__all__ = [
    "ApplicabilityError",
    "ApplicabilityRow",
    "Constraint",
    "Convexity",
    "CurvatureReport",
    "DegeneratePointError",
    "DgpConfig",
    "EvaluationError",
    "ExpressionError",
    "FORECASTERS",
    "FaseResult",
    "GUARANTEED_REDUCTION",
    "GraphFn",
    "GraphLift",
    "GraphMap",
    "GuaranteeVerdict",
    "LinearARForecaster",
    "ManifoldSpec",
    "NEWTON_AS_PRINTED",
    "NEWTON_FULL",
    "NOT_APPLICABLE",
    "NlreconError",
    "PersistenceForecaster",
    "ProjectionError",
    "ProjectionResult",
    "ReductionEstimate",
    "SCHEMA_VERSION",
    "SingularConstraintError",
    "SingularKKTError",
    "SolverOptions",
    "SolverQualityError",
    "StrategyOutcome",
    "StudyConfig",
    "StudyRecord",
    "StudyReport",
    "applicability_study",
    "apply_strategy",
    "batch_project",
    "binary_coverage",
    "bootstrap_predictive",
    "calibration_curve",
    "clopper_pearson",
    "compile_expression",
    "corollary1_check",
    "curvature_report",
    "eval_f",
    "eval_hessians",
    "eval_jacobian",
    "fase_reconcile",
    "fit_forecaster",
    "format_number",
    "frechet_mean_euclidean",
    "generate_dataset",
    "halfspace_test",
    "load_manifold_config",
    "normal_correction",
    "project",
    "registry_get",
    "registry_names",
    "restricted_hessian",
    "run_study",
    "second_fundamental_form",
    "spec_from_config",
    "spec_from_graphs",
    "study_config_from_dict",
    "tangent_basis",
    "theorem1_check",
    "theorem2b_check",
    "theorem3_estimate",
    "write_applicability_csv",
    "write_study_outputs",
]
