"""Occupancy models with imperfect detection.

Detection histories from repeated site visits are modelled with a
logistic occupancy regression and a logistic per-visit detection
regression. The package estimates them either in two stages
(detection first, conditional on detection; then occupancy with
detection held fixed, with the stage-one uncertainty propagated into
the reported variance) or by joint maximum likelihood, and ships a
simulation harness for comparing the estimators.
"""

from .errors import (
    BoundaryEstimate,
    ConvergenceWarning,
    DimensionMismatch,
    EmptyFile,
    EmptyInput,
    InsufficientReplicates,
    InvalidConfig,
    LengthMismatch,
    MissingColumn,
    NoDetectedSites,
    NonBinaryDetection,
    NonConvergence,
    NonFiniteEvaluation,
    NotPositiveDefinite,
    OccufitError,
    RaggedSurveyGroup,
    RankDeficientDesign,
    SeparationSuspected,
)
from .kernels import BACKEND
from .model import (
    Coefficients,
    Dataset,
    ProbabilitySurface,
    conditional_detection_loglik,
    conditional_detection_score,
    detection_indicator_loglik,
    detection_probs,
    full_log_likelihood,
    full_score,
    logistic,
    partial_occupancy_loglik,
    partial_occupancy_score,
    probability_surface,
    theta_from_p,
)
from .optim import (
    OptimResult,
    Termination,
    bfgs_maximize,
    fd_gradient,
    fd_jacobian,
    newton_maximize,
    solve_spd,
)
from .rng import RandomStream
from .detection import DetectionFit, DetectionModel, detection_aic, fit_detection
from .occupancy import (
    OccupancyFit,
    Stage2Method,
    TwoStageFit,
    detection_cross_term,
    fit_occupancy,
    fit_two_stage,
    occupancy_information,
    psi_with_se,
    sandwich_variance,
)
from .fullfit import FullFit, fit_full
from .simulate import (
    MAD_SCALE,
    ParamStats,
    SimConfig,
    StudyResult,
    StudySummary,
    agreement_table,
    generate_dataset,
    robust_mad,
    run_study,
    summarize_study,
)
from .io import CsvSchema, load_dataset_csv, save_dataset_csv
from .report import CoefficientRow, FitReport, full_report, two_stage_report

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BACKEND",
    # errors
    "OccufitError",
    "DimensionMismatch",
    "LengthMismatch",
    "EmptyInput",
    "EmptyFile",
    "MissingColumn",
    "NonBinaryDetection",
    "RaggedSurveyGroup",
    "InvalidConfig",
    "InsufficientReplicates",
    "NoDetectedSites",
    "RankDeficientDesign",
    "NotPositiveDefinite",
    "NonFiniteEvaluation",
    "NonConvergence",
    "BoundaryEstimate",
    "SeparationSuspected",
    "ConvergenceWarning",
    # model
    "Dataset",
    "Coefficients",
    "ProbabilitySurface",
    "probability_surface",
    "logistic",
    "detection_probs",
    "theta_from_p",
    "full_log_likelihood",
    "full_score",
    "conditional_detection_loglik",
    "conditional_detection_score",
    "partial_occupancy_loglik",
    "partial_occupancy_score",
    "detection_indicator_loglik",
    # optimisation
    "OptimResult",
    "Termination",
    "newton_maximize",
    "bfgs_maximize",
    "solve_spd",
    "fd_gradient",
    "fd_jacobian",
    # randomness
    "RandomStream",
    # fitting
    "DetectionModel",
    "DetectionFit",
    "fit_detection",
    "detection_aic",
    "Stage2Method",
    "OccupancyFit",
    "TwoStageFit",
    "fit_occupancy",
    "fit_two_stage",
    "occupancy_information",
    "detection_cross_term",
    "sandwich_variance",
    "psi_with_se",
    "FullFit",
    "fit_full",
    # simulation
    "MAD_SCALE",
    "SimConfig",
    "StudyResult",
    "StudySummary",
    "ParamStats",
    "generate_dataset",
    "run_study",
    "robust_mad",
    "summarize_study",
    "agreement_table",
    # input and output
    "CsvSchema",
    "load_dataset_csv",
    "save_dataset_csv",
    "CoefficientRow",
    "FitReport",
    "two_stage_report",
    "full_report",
]
