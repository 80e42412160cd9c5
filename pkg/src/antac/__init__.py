"""Covariate-adjusted Gaussian graphical model estimation.

Two tuning-free scaled-lasso passes turn (X, Y) data into per-edge precision
estimates with standard errors and P-values: the first regresses every
response column on the covariates and keeps the residuals, the second
regresses residual column pairs on the rest and inverts the 2x2 residual
cross-product. Adaptive thresholding on top recovers the graph support.
Simulation generators, support-recovery metrics and a CLI round out the
package.
"""

__version__ = "0.1.0"

from .adjust import AdjustmentResult, Dataset, adjust, center_columns, lambda1
from .edges import (
    EdgeEstimate,
    EdgePair,
    PrecisionEstimate,
    all_pairs,
    edge_pvalue,
    estimate_edge,
    estimate_graph,
    fisher_variance,
    lambda2,
    partial_correlation,
)
from .errors import (
    AntacError,
    DimensionMismatch,
    DomainError,
    GenerationFailed,
    NotPositiveDefinite,
    SingularPsi,
)
from .inference import (
    SupportMask,
    ThresholdedPrecision,
    antac_threshold,
    cap_estimator,
    fdr_adjust,
    threshold_level,
)
from .metrics import (
    ConfusionCounts,
    CurvePoint,
    MetricReport,
    compute_metrics,
    confusion,
    curve,
)
from .numerics import (
    RngStream,
    cholesky,
    mvn_sample,
    std_normal_cdf,
    std_normal_quantile,
    student_t_cdf,
    student_t_quantile,
)
from .pipeline import (
    FitOptions,
    FitResult,
    StudyConfig,
    StudyResult,
    fit_dataset,
    run_study,
)
from .scaled_lasso import (
    KktReport,
    ScaledLassoFit,
    ScaledLassoProblem,
    SolverOptions,
    kkt_check,
    lasso_inner,
    solve_scaled_lasso,
)
from .simgen import (
    GroundTruth,
    ModelSpec,
    gen_gamma,
    gen_hetero_product,
    gen_magnified_block,
    gen_omega_homogeneous,
    gen_omega_table1,
    make_truth,
    simulate_dataset,
)

__all__ = [
    "AdjustmentResult",
    "AntacError",
    "ConfusionCounts",
    "CurvePoint",
    "Dataset",
    "DimensionMismatch",
    "DomainError",
    "EdgeEstimate",
    "EdgePair",
    "FitOptions",
    "FitResult",
    "GenerationFailed",
    "GroundTruth",
    "KktReport",
    "MetricReport",
    "ModelSpec",
    "NotPositiveDefinite",
    "PrecisionEstimate",
    "RngStream",
    "ScaledLassoFit",
    "ScaledLassoProblem",
    "SingularPsi",
    "SolverOptions",
    "StudyConfig",
    "StudyResult",
    "SupportMask",
    "ThresholdedPrecision",
    "adjust",
    "all_pairs",
    "antac_threshold",
    "cap_estimator",
    "center_columns",
    "cholesky",
    "compute_metrics",
    "confusion",
    "curve",
    "edge_pvalue",
    "estimate_edge",
    "estimate_graph",
    "fdr_adjust",
    "fisher_variance",
    "fit_dataset",
    "gen_gamma",
    "gen_hetero_product",
    "gen_magnified_block",
    "gen_omega_homogeneous",
    "gen_omega_table1",
    "kkt_check",
    "lambda1",
    "lambda2",
    "lasso_inner",
    "make_truth",
    "mvn_sample",
    "partial_correlation",
    "run_study",
    "simulate_dataset",
    "solve_scaled_lasso",
    "std_normal_cdf",
    "std_normal_quantile",
    "student_t_cdf",
    "student_t_quantile",
    "threshold_level",
]
