"""Pluggable nuisance learners.

Every learner is addressed by a :class:`LearnerSpec` (kind, task,
hyperparameters) and fitted through :func:`fit`, which returns a
:class:`FittedModel` with a deterministic ``predict``. Probability-task
predictions are clamped to [0, 1] before any downstream trimming.

Kinds
-----
lasso
    Coordinate-descent lasso for regression; l1-penalized logistic for the
    probability task. Default penalty is the plug-in rule.
reg_tree
    CART with cost-complexity pruning chosen by 10-fold CV.
random_forest
    1000 bootstrapped CART trees, per-split feature subsampling.
boosting
    Depth-2 gradient-boosted trees; rate and rounds by 10-fold CV.
ensemble
    Simplex-weighted stack of component learners (5-fold CV weights).
best
    Per-target winner among candidate kinds by out-of-sample MSE.
oracle_linear
    Unpenalized least squares / logistic; a correctly specified fast
    learner for simulation studies on linear designs.

Tie-breaking between equally good methods follows the fixed order
``lasso < reg_tree < random_forest < boosting < ensemble``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from ..data import derive_seed, make_partition
from ..errors import EmptyCandidatesError, InsufficientDataError
from .boosting import BoostingModel, fit_boosting
from .ensemble import EnsembleModel, fit_ensemble, project_to_simplex, solve_simplex_weights
from .forest import ForestModel, fit_random_forest
from .linear import (
    LassoFit,
    LinearFit,
    LogisticFit,
    LogisticLassoFit,
    fit_lasso,
    fit_logistic,
    fit_logistic_lasso,
    fit_ols,
    lasso_kkt_violation,
    plugin_penalty,
    soft_threshold,
    standardize_columns,
)
from .tree import RegressionTreeModel, fit_regression_tree

KINDS = ("lasso", "reg_tree", "random_forest", "boosting", "ensemble", "best", "oracle_linear")
TASKS = ("regression", "probability")

# tie-break order for best-method selection
METHOD_ORDER = ("lasso", "reg_tree", "random_forest", "boosting", "ensemble")

DEFAULT_ENSEMBLE_COMPONENTS = ("lasso", "boosting", "random_forest")
DEFAULT_BEST_CANDIDATES = ("lasso", "reg_tree", "random_forest", "boosting", "ensemble")

_HYPERPARAMETER_CHECKS = {
    "lasso": {
        "penalty": lambda v: v is None or v == "plugin" or float(v) >= 0.0,
        "max_sweeps": lambda v: int(v) >= 1,
        "kkt_tol": lambda v: float(v) > 0.0,
        "plugin_c": lambda v: float(v) > 0.0,
        "plugin_gamma": lambda v: 0.0 < float(v) < 1.0,
    },
    "reg_tree": {
        "min_leaf": lambda v: int(v) >= 1,
        "max_depth": lambda v: v is None or int(v) >= 1,
        "cv_folds": lambda v: int(v) == 0 or int(v) >= 2,
        "alpha": lambda v: v is None or float(v) >= 0.0,
    },
    "random_forest": {
        "n_trees": lambda v: int(v) >= 1,
        "min_leaf": lambda v: int(v) >= 1,
        "max_depth": lambda v: v is None or int(v) >= 1,
        "bootstrap": lambda v: isinstance(v, bool),
        "mtry": lambda v: v is None or int(v) >= 1,
    },
    "boosting": {
        "learning_rate": lambda v: v is None or 0.0 < float(v) <= 1.0,
        "n_rounds": lambda v: v is None or int(v) >= 1,
        "lr_grid": lambda v: all(0.0 < float(r) <= 1.0 for r in v),
        "max_rounds": lambda v: int(v) >= 1,
        "max_depth": lambda v: int(v) >= 1,
        "min_leaf": lambda v: int(v) >= 1,
        "cv_folds": lambda v: int(v) == 0 or int(v) >= 2,
    },
    "ensemble": {
        "components": lambda v: len(v) >= 2,
        "component_hyperparameters": lambda v: isinstance(v, Mapping),
        "cv_folds": lambda v: int(v) >= 2,
        "max_iter": lambda v: int(v) >= 1,
        "tol": lambda v: float(v) > 0.0,
    },
    "best": {
        "candidates": lambda v: len(v) >= 1,
        "component_hyperparameters": lambda v: isinstance(v, Mapping),
        "cv_folds": lambda v: int(v) >= 2,
    },
    "oracle_linear": {},
}


@dataclass(frozen=True)
class LearnerSpec:
    """Recipe for a nuisance learner: kind, task, and hyperparameter overrides."""

    kind: str
    task: str = "regression"
    hyperparameters: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}; expected one of {KINDS}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        checks = _HYPERPARAMETER_CHECKS[self.kind]
        for key, value in self.hyperparameters.items():
            if key not in checks:
                raise ValueError(f"unknown hyperparameter {key!r} for learner {self.kind!r}")
            try:
                ok = checks[key](value)
            except (TypeError, ValueError):
                ok = False
            if not ok:
                raise ValueError(f"hyperparameter {key}={value!r} out of range for {self.kind!r}")
        object.__setattr__(self, "hyperparameters", dict(self.hyperparameters))

    def with_task(self, task: str) -> "LearnerSpec":
        return self if self.task == task else replace(self, task=task)


@dataclass(frozen=True)
class FittedModel:
    """A fitted learner: opaque inner state plus training diagnostics."""

    inner: object
    task: str
    spec: LearnerSpec
    diagnostics: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        pred = np.asarray(self.inner.predict(X), dtype=np.float64)
        if self.task == "probability":
            pred = np.clip(pred, 0.0, 1.0)
        return pred


def _component_specs(names, task, hyper_map) -> list[LearnerSpec]:
    return [LearnerSpec(kind=name, task=task, hyperparameters=dict(hyper_map.get(name, {}))) for name in names]


def fit(spec: LearnerSpec, X, y, seed: int) -> FittedModel:
    """Fit the learner described by ``spec`` on (X, y).

    Deterministic in (spec, X, y, seed); ``seed`` drives every internal
    random choice (bootstraps, feature subsampling, CV partitions).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2:
        raise InsufficientDataError(f"learner {spec.kind!r} needs at least 2 rows, got {X.shape[0]}")
    h = spec.hyperparameters

    if spec.kind == "lasso":
        penalty = h.get("penalty", "plugin")
        lam = None if penalty in (None, "plugin") else float(penalty)
        plugin = dict(
            plugin_c=float(h.get("plugin_c", 1.1)),
            plugin_gamma=float(h.get("plugin_gamma", 0.1)),
        )
        if spec.task == "probability":
            inner = fit_logistic_lasso(X, y, lam, **plugin)
        else:
            inner = fit_lasso(
                X,
                y,
                lam,
                max_sweeps=int(h.get("max_sweeps", 10_000)),
                kkt_tol=float(h.get("kkt_tol", 1e-7)),
                **plugin,
            )
        diag = {"penalty": inner.lam}
    elif spec.kind == "reg_tree":
        inner = fit_regression_tree(
            X,
            y,
            task=spec.task,
            min_leaf=int(h.get("min_leaf", 5)),
            max_depth=h.get("max_depth"),
            cv_folds=int(h.get("cv_folds", 10)),
            alpha=h.get("alpha"),
            seed=seed,
        )
        diag = dict(inner.diagnostics)
    elif spec.kind == "random_forest":
        inner = fit_random_forest(
            X,
            y,
            task=spec.task,
            n_trees=int(h.get("n_trees", 1000)),
            min_leaf=int(h.get("min_leaf", 5)),
            max_depth=h.get("max_depth"),
            bootstrap=bool(h.get("bootstrap", True)),
            mtry=h.get("mtry"),
            seed=seed,
        )
        diag = dict(inner.diagnostics)
    elif spec.kind == "boosting":
        inner = fit_boosting(
            X,
            y,
            task=spec.task,
            learning_rate=h.get("learning_rate"),
            n_rounds=h.get("n_rounds"),
            lr_grid=tuple(h.get("lr_grid", (0.05, 0.1, 0.3))),
            max_rounds=int(h.get("max_rounds", 200)),
            max_depth=int(h.get("max_depth", 2)),
            min_leaf=int(h.get("min_leaf", 5)),
            cv_folds=int(h.get("cv_folds", 10)),
            seed=seed,
        )
        diag = dict(inner.diagnostics)
    elif spec.kind == "ensemble":
        specs = _component_specs(
            h.get("components", DEFAULT_ENSEMBLE_COMPONENTS),
            spec.task,
            h.get("component_hyperparameters", {}),
        )
        inner = fit_ensemble(
            specs,
            X,
            y,
            task=spec.task,
            cv_folds=int(h.get("cv_folds", 5)),
            seed=seed,
            max_iter=int(h.get("max_iter", 5000)),
            tol=float(h.get("tol", 1e-9)),
        )
        diag = dict(inner.diagnostics)
        diag["weights"] = [float(w) for w in inner.weights]
    elif spec.kind == "best":
        candidates = tuple(h.get("candidates", DEFAULT_BEST_CANDIDATES))
        hyper_map = h.get("component_hyperparameters", {})
        folds = int(h.get("cv_folds", 5))
        losses = {
            name: cv_mse(
                LearnerSpec(kind=name, task=spec.task, hyperparameters=dict(hyper_map.get(name, {}))),
                X,
                y,
                folds=folds,
                seed=derive_seed(seed, 1, c),
            )
            for c, name in enumerate(candidates)
        }
        winner = select_best({"target": losses})["target"]
        chosen = LearnerSpec(kind=winner, task=spec.task, hyperparameters=dict(hyper_map.get(winner, {})))
        fitted = fit(chosen, X, y, seed)
        return FittedModel(
            inner=fitted.inner,
            task=spec.task,
            spec=spec,
            diagnostics={"selected": winner, "cv_losses": losses, **fitted.diagnostics},
        )
    elif spec.kind == "oracle_linear":
        inner = fit_logistic(X, y) if spec.task == "probability" else fit_ols(X, y)
        diag = {}
    else:  # pragma: no cover - guarded by LearnerSpec validation
        raise ValueError(f"unknown learner kind {spec.kind!r}")

    in_sample = inner.predict(X)
    if spec.task == "probability":
        in_sample = np.clip(in_sample, 0.0, 1.0)
    diag.setdefault("in_sample_mse", float(np.mean((y - in_sample) ** 2)))
    return FittedModel(inner=inner, task=spec.task, spec=spec, diagnostics=diag)


def predict(model: FittedModel, X) -> np.ndarray:
    """Evaluate a fitted model; probability-task output is clamped to [0, 1]."""
    return model.predict(X)


def cv_mse(spec: LearnerSpec, X, y, *, folds: int = 5, seed: int = 0) -> float:
    """Mean out-of-fold squared error of ``spec`` under a seeded K-fold split."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    folds = min(folds, n)
    if folds < 2:
        raise InsufficientDataError(f"cross-validation needs at least 2 rows, got {n}")
    partition = make_partition(n, folds, derive_seed(seed, 101))
    sse = 0.0
    for k in range(1, folds + 1):
        tr = partition.complement_indices(k)
        te = partition.fold_indices(k)
        model = fit(spec, X[tr], y[tr], derive_seed(seed, 102, k))
        sse += float(np.sum((y[te] - model.predict(X[te])) ** 2))
    return sse / n


def select_best(per_nuisance_cv_losses: Mapping[str, Mapping[str, float]]) -> dict[str, str]:
    """Per-nuisance argmin over method losses.

    Ties break toward the earlier entry of :data:`METHOD_ORDER`; methods not
    in that order rank after it, alphabetically.
    """
    def rank(name: str) -> tuple:
        return (METHOD_ORDER.index(name), "") if name in METHOD_ORDER else (len(METHOD_ORDER), name)

    out = {}
    for nuisance, losses in per_nuisance_cv_losses.items():
        if not losses:
            raise EmptyCandidatesError(f"no candidate losses for nuisance {nuisance!r}")
        for method, loss in losses.items():
            if not np.isfinite(loss):
                raise ValueError(f"non-finite loss {loss!r} for {method!r} on nuisance {nuisance!r}")
        out[nuisance] = min(losses, key=lambda name: (losses[name], rank(name)))
    return out


__all__ = [
    "KINDS",
    "TASKS",
    "METHOD_ORDER",
    "LearnerSpec",
    "FittedModel",
    "fit",
    "predict",
    "cv_mse",
    "select_best",
    "fit_lasso",
    "fit_logistic_lasso",
    "fit_logistic",
    "fit_ols",
    "plugin_penalty",
    "soft_threshold",
    "standardize_columns",
    "lasso_kkt_violation",
    "LassoFit",
    "LinearFit",
    "LogisticFit",
    "LogisticLassoFit",
    "fit_regression_tree",
    "RegressionTreeModel",
    "fit_random_forest",
    "ForestModel",
    "fit_boosting",
    "BoostingModel",
    "fit_ensemble",
    "EnsembleModel",
    "project_to_simplex",
    "solve_simplex_weights",
]
