"""Stacking ensemble with weights on the probability simplex.

The weights minimize the cross-validated MSE of the weighted component
predictions, solved by projected gradient descent on the simplex (exact
Euclidean projection, fixed step 1/L from the largest eigenvalue of the
prediction Gram matrix). Starting from uniform weights preserves symmetry,
so interchangeable components receive equal weight. The final model refits
every component on the full sample and combines them with the solved
weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import derive_seed, make_partition
from ..errors import DimensionMismatchError, InsufficientDataError


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1} (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.max(np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1.0))[0])
    tau = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def solve_simplex_weights(
    P: np.ndarray,
    y: np.ndarray,
    *,
    max_iter: int = 5000,
    tol: float = 1e-9,
) -> tuple[np.ndarray, int]:
    """Minimize (1/n)||y - P w||^2 over the simplex by projected gradient.

    Returns the weights and the iteration count; runs to the iteration cap
    when the tolerance is never reached (the iterate is still feasible and
    monotonically improving).
    """
    P = np.asarray(P, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, c = P.shape
    gram = P.T @ P / n
    pty = P.T @ y / n
    lip = 2.0 * float(np.linalg.eigvalsh(gram)[-1])
    step = 1.0 / max(lip, 1e-12)
    w = np.full(c, 1.0 / c)
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (gram @ w - pty)
        w_new = project_to_simplex(w - step * grad)
        delta = float(np.max(np.abs(w_new - w)))
        w = w_new
        if delta <= tol:
            break
    return w, it


@dataclass
class EnsembleModel:
    components: list
    weights: np.ndarray
    n_features: int
    task: str
    diagnostics: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected {self.n_features} feature columns, got {X.shape[1]}"
            )
        if X.shape[0] == 0:
            return np.empty(0)
        pred = np.zeros(X.shape[0])
        for w, model in zip(self.weights, self.components):
            pred += w * model.predict(X)
        if self.task == "probability":
            pred = np.clip(pred, 0.0, 1.0)
        return pred


def fit_ensemble(
    component_specs,
    X,
    y,
    *,
    task: str = "regression",
    cv_folds: int = 5,
    seed: int = 0,
    max_iter: int = 5000,
    tol: float = 1e-9,
) -> EnsembleModel:
    """Fit a simplex-weighted stack of the given learner specs.

    Out-of-fold predictions from ``cv_folds``-fold splitting form the design
    for the weight solve; components are then refit on the full sample.
    Component fitting errors propagate unchanged.
    """
    from . import fit as fit_spec  # deferred: avoids import cycle with the dispatcher

    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if len(component_specs) < 2:
        raise ValueError(f"ensemble needs at least 2 components, got {len(component_specs)}")
    if cv_folds < 2:
        raise ValueError(f"ensemble weight selection needs cv_folds >= 2, got {cv_folds}")
    folds = min(cv_folds, n)
    if folds < 2:
        raise InsufficientDataError(f"ensemble needs at least 2 rows, got {n}")
    partition = make_partition(n, folds, derive_seed(seed, 0))
    oof = np.zeros((n, len(component_specs)))
    for k in range(1, folds + 1):
        tr = partition.complement_indices(k)
        te = partition.fold_indices(k)
        for c, spec in enumerate(component_specs):
            model = fit_spec(spec, X[tr], y[tr], derive_seed(seed, k, c))
            oof[te, c] = model.predict(X[te])
    weights, n_iter = solve_simplex_weights(oof, y, max_iter=max_iter, tol=tol)
    components = [
        fit_spec(spec, X, y, derive_seed(seed, 0, c)) for c, spec in enumerate(component_specs)
    ]
    cv_mse = float(np.mean((y - oof @ weights) ** 2))
    return EnsembleModel(
        components=components,
        weights=weights,
        n_features=X.shape[1],
        task=task,
        diagnostics={"cv_mse": cv_mse, "weight_iterations": n_iter, "oof_mse_per_component": [
            float(np.mean((y - oof[:, c]) ** 2)) for c in range(oof.shape[1])
        ]},
    )
