"""dmlkit: double/debiased machine learning for treatment effects.

Estimates average treatment effects (and effects on the treated) from
observational data with doubly robust orthogonal scores, K-fold
cross-fitting over pluggable machine-learning nuisance learners, and
repeated-sample-splitting aggregation, plus a Monte Carlo harness that
checks the method's statistical guarantees at desk scale.
"""

from .crossfit import CrossfitConfig, confidence_interval, crossfit_estimate, fit_nuisances, normal_quantile
from .data import (
    AggregateReport,
    Dataset,
    EstimateReport,
    FoldPartition,
    NuisanceEstimates,
    PlmNuisances,
    derive_seed,
    make_partition,
    validate_dataset,
)
from .learners import FittedModel, LearnerSpec, cv_mse, fit, predict, select_best
from .repeated import aggregate_reports, run_repeated, sigma_mean, sigma_median
from .scores import (
    ScoreInputs,
    ate_score,
    atte_score,
    gateaux_derivative,
    naive_score,
    plm_score,
    solve_theta,
    trim_propensity,
)
from .simulation import (
    CoverageResult,
    DgpSpec,
    coverage_experiment,
    generate,
    naive_plugin_experiment,
    rate_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "CoverageResult",
    "CrossfitConfig",
    "Dataset",
    "DgpSpec",
    "EstimateReport",
    "FittedModel",
    "FoldPartition",
    "LearnerSpec",
    "NuisanceEstimates",
    "PlmNuisances",
    "ScoreInputs",
    "aggregate_reports",
    "ate_score",
    "atte_score",
    "confidence_interval",
    "coverage_experiment",
    "crossfit_estimate",
    "cv_mse",
    "derive_seed",
    "fit",
    "fit_nuisances",
    "gateaux_derivative",
    "generate",
    "make_partition",
    "naive_plugin_experiment",
    "naive_score",
    "normal_quantile",
    "plm_score",
    "predict",
    "rate_experiment",
    "run_repeated",
    "select_best",
    "sigma_mean",
    "sigma_median",
    "solve_theta",
    "trim_propensity",
    "validate_dataset",
    "__version__",
]
