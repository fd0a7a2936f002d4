"""K-fold cross-fitting: per-fold nuisance fitting, score roots, variance, CI.

The estimate runs in three steps. A seeded balanced partition splits the
sample; for each fold k the nuisances are fitted on the complement (outcome
regressions arm-separately, propensity on all training rows, then trimmed)
and the fold-level root of the empirical moment is solved on the fold
itself; the K roots are averaged. The variance estimate evaluates every
observation's score at the *final averaged* estimate with the nuisances of
that observation's own fold:

    sigma^2 = (1/N) sum_i psi(W_i; theta_final, nuisances of fold(i))^2,

and the two-sided confidence interval is theta_final +/- z_{1-alpha/2}
sigma / sqrt(N).

A failing fold aborts the whole estimate (with the fold index attached to
the error) rather than being dropped silently, since dropping folds biases
the average. Per-fold learner seeds derive from ``seed XOR fold_index`` so
results are identical however the folds are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import (
    Dataset,
    EstimateReport,
    FoldPartition,
    NuisanceEstimates,
    PlmNuisances,
    derive_seed,
    make_partition,
)
from .errors import ArmMissingInTrainingFoldError, DmlkitError, OutOfDomainError
from .learners import LearnerSpec, fit
from .scores import SCORE_KINDS, score_values, solve_theta, trim_propensity

# Acklam's rational approximation coefficients for the inverse normal CDF.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, absolute error well below 1e-9.

    Acklam's rational approximation refined by one Newton step against the
    erfc-based CDF. Only probabilities strictly inside (0, 1) are valid.
    """
    if not 0.0 < p < 1.0 or math.isnan(p):
        raise OutOfDomainError(f"quantile defined for p in (0, 1), got {p}")
    if p > 0.5:
        return -normal_quantile(1.0 - p)  # exact for doubles in [0.5, 1]
    if p < 0.02425:
        # lower tail: the rational expression is negative as-is
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    # one Newton refinement: x <= 0 here, so the erfc argument is nonnegative
    cdf = 0.5 * math.erfc(-x / math.sqrt(2.0))
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if pdf > 0.0:
        x -= (cdf - p) / pdf
    return x


def confidence_interval(theta: float, sigma: float, n: int, alpha: float) -> tuple[float, float]:
    """Two-sided normal interval theta +/- z_{1-alpha/2} sigma / sqrt(n)."""
    half = normal_quantile(1.0 - alpha / 2.0) * sigma / math.sqrt(n)
    return theta - half, theta + half


@dataclass(frozen=True)
class CrossfitConfig:
    """Settings for one cross-fitting pass.

    ``learner_g`` fits the outcome regressions (and the conditional outcome
    mean for the partially linear score); ``learner_m`` fits the propensity.
    Tasks are coerced: the outcome learner runs as regression, the
    propensity learner as probability.
    """

    score: str = "ate"
    K: int = 5
    learner_g: LearnerSpec = field(default_factory=lambda: LearnerSpec("lasso"))
    learner_m: LearnerSpec = field(default_factory=lambda: LearnerSpec("lasso", task="probability"))
    trim: tuple[float, float] = (0.01, 0.99)
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.score not in SCORE_KINDS:
            raise ValueError(f"unknown score {self.score!r}; expected one of {SCORE_KINDS}")
        if self.K < 2:
            raise ValueError(f"cross-fitting needs K >= 2 folds, got {self.K}")
        lo, hi = self.trim
        if not 0.0 < lo < hi < 1.0:
            raise ValueError(f"trim cutoffs must satisfy 0 < lo < hi < 1, got {self.trim}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        object.__setattr__(self, "trim", (float(lo), float(hi)))
        object.__setattr__(self, "learner_g", self.learner_g.with_task("regression"))
        object.__setattr__(self, "learner_m", self.learner_m.with_task("probability"))


NuisanceProvider = Callable[..., tuple]


def _fit_nuisances_counted(
    data: Dataset, partition: FoldPartition, k: int, config: CrossfitConfig
) -> tuple[NuisanceEstimates | PlmNuisances, int]:
    train = partition.complement_indices(k)
    evaluate = partition.fold_indices(k)
    X_tr, y_tr, d_tr = data.covariates[train], data.outcomes[train], data.treatments[train]
    X_ev = data.covariates[evaluate]
    fold_seed = config.seed ^ k

    treated = d_tr == 1
    if config.score != "plm" and (not treated.any() or treated.all()):
        raise ArmMissingInTrainingFoldError(
            f"training complement of fold {k} lacks a treatment arm "
            f"({int(treated.sum())} treated of {len(d_tr)})"
        )

    m_model = fit(config.learner_m, X_tr, d_tr.astype(np.float64), derive_seed(fold_seed, 2))
    m_raw = m_model.predict(X_ev)

    if config.score == "plm":
        l_model = fit(config.learner_g, X_tr, y_tr, derive_seed(fold_seed, 0))
        # no trimming here: the residual D - m never gets inverted
        return PlmNuisances(l_hat=l_model.predict(X_ev), m_hat=m_raw), 0

    g0_model = fit(config.learner_g, X_tr[~treated], y_tr[~treated], derive_seed(fold_seed, 0))
    g1_model = fit(config.learner_g, X_tr[treated], y_tr[treated], derive_seed(fold_seed, 1))
    m_hat, n_trimmed = trim_propensity(m_raw, *config.trim)
    return (
        NuisanceEstimates(
            g0_hat=g0_model.predict(X_ev),
            g1_hat=g1_model.predict(X_ev),
            m_hat=m_hat,
            m_bar=float(d_tr.mean()),
        ),
        n_trimmed,
    )


def fit_nuisances(
    data: Dataset, partition: FoldPartition, k: int, config: CrossfitConfig
) -> NuisanceEstimates | PlmNuisances:
    """Fit nuisances on the complement of fold ``k`` and evaluate them on it.

    Interactive scores get arm-separate outcome regressions (untreated rows
    for g0, treated rows for g1), a propensity fitted on all training rows
    and trimmed to the configured cutoffs, and the training-fold treatment
    mean. The partially linear score gets the conditional outcome mean and
    the untrimmed propensity.
    """
    return _fit_nuisances_counted(data, partition, k, config)[0]


def crossfit_estimate(
    data: Dataset,
    config: CrossfitConfig,
    *,
    partition: FoldPartition | None = None,
    nuisance_provider: NuisanceProvider | None = None,
) -> EstimateReport:
    """Run the full K-fold cross-fitting pass and return the estimate report.

    ``partition`` overrides the internally generated split (its K and seed
    then take precedence); ``nuisance_provider`` replaces learner fitting,
    which the simulation harness uses to inject true nuisances. Providers
    return ``(nuisances, n_trimmed)`` per fold.
    """
    if partition is None:
        partition = make_partition(data.n, config.K, config.seed)
    provider = nuisance_provider or _fit_nuisances_counted
    y, d = data.outcomes, data.treatments

    per_fold = []
    n_trimmed = 0
    for k in range(1, partition.K + 1):
        try:
            nuis, count = provider(data, partition, k, config)
            idx = partition.fold_indices(k)
            theta_k = solve_theta(config.score, y[idx], d[idx], nuis)
        except DmlkitError as exc:
            raise type(exc)(f"fold {k}: {exc}") from exc
        per_fold.append((idx, nuis, theta_k))
        n_trimmed += count

    thetas = [theta_k for _, _, theta_k in per_fold]
    theta_hat = float(np.mean(thetas))

    psi = np.empty(data.n)
    for idx, nuis, _ in per_fold:
        psi[idx] = score_values(config.score, y[idx], d[idx], nuis, theta_hat)
    sigma_hat = float(np.sqrt(np.mean(psi**2)))
    if config.score == "plm":
        # the residual-product score has theta-slope -(d - m)^2 instead of -1,
        # so the sandwich variance divides by the empirical Jacobian
        jacobian = 0.0
        for idx, nuis, _ in per_fold:
            jacobian += float(np.sum((d[idx] - nuis.m_hat) ** 2))
        sigma_hat /= jacobian / data.n
    ci_lo, ci_hi = confidence_interval(theta_hat, sigma_hat, data.n, config.alpha)
    return EstimateReport(
        theta_hat=theta_hat,
        sigma_hat=sigma_hat,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        alpha=config.alpha,
        per_fold_thetas=tuple(thetas),
        n_trimmed=n_trimmed,
        seed=partition.seed,
    )


def config_with_seed(config: CrossfitConfig, seed: int) -> CrossfitConfig:
    return replace(config, seed=seed)


__all__ = [
    "CrossfitConfig",
    "normal_quantile",
    "confidence_interval",
    "fit_nuisances",
    "crossfit_estimate",
    "config_with_seed",
]
