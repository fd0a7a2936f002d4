"""Linear nuisance learners: lasso, l1-penalized logistic, OLS, logistic.

The lasso minimizes

    (1/2n) ||y - b0 - X b||^2 + lam ||b||_1

by cyclic coordinate descent on internally standardized features (zero mean,
unit variance in the 1/n convention), with an unpenalized intercept. The
solver stops when the largest KKT violation falls below ``kkt_tol``; on an
orthonormal design one sweep reproduces the soft-thresholding closed form.
Coefficients are reported on the original feature scale.

The default penalty is a plug-in rule

    lam = c * sigma_r * Phi^inv(1 - gamma / (2p)) / sqrt(n)

with c = 1.1, gamma = 0.1 and the residual scale sigma_r refit twice from
lasso residuals (starting from the centered-outcome scale). Pass an explicit
``lam`` to override.

The l1-penalized logistic fit (used for lasso propensities) minimizes the
average negative log-likelihood plus ``lam ||b||_1`` by FISTA proximal
gradient on the same standardized features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    DimensionMismatchError,
    InsufficientDataError,
    NoConvergenceError,
    SingularDesignError,
)

PLUGIN_C = 1.1
PLUGIN_GAMMA = 0.1
PLUGIN_REFITS = 2


def soft_threshold(z: float, t: float) -> float:
    """Scalar soft-thresholding operator sign(z) * max(|z| - t, 0)."""
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def standardize_columns(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale columns to zero mean, unit 1/n-variance.

    Zero-variance columns are centered and left with scale 1 so they simply
    drop out of the fit.
    """
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    scale = np.sqrt(np.mean((X - mean) ** 2, axis=0))
    scale = np.where(scale > 0.0, scale, 1.0)
    return (X - mean) / scale, mean, scale


@dataclass(frozen=True)
class LassoFit:
    """Lasso solution with enough state to predict and audit KKT conditions."""

    intercept: float
    coef: np.ndarray        # original feature scale
    coef_std: np.ndarray    # standardized feature scale (the penalized frame)
    lam: float
    n_sweeps: int
    x_mean: np.ndarray
    x_scale: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.coef)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected {self.n_features} feature columns, got {X.shape[1]}"
            )
        return self.intercept + X @ self.coef


def _coordinate_descent(
    Xs: np.ndarray,
    yc: np.ndarray,
    lam: float,
    max_sweeps: int,
    kkt_tol: float,
    active_cols: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Cyclic coordinate descent on standardized data; returns (beta, sweeps).

    Each coordinate update is exact because (1/n) Xs_j . Xs_j = 1. After a
    full pass the KKT violations are checked on all coordinates; passes over
    the current active set are interleaved for speed. ``active_cols`` masks
    out zero-variance columns entirely.
    """
    n, p = Xs.shape
    beta = np.zeros(p)
    r = yc.copy()
    cols = np.flatnonzero(active_cols)

    def sweep(idx) -> float:
        max_delta = 0.0
        for j in idx:
            bj_old = beta[j]
            rho = bj_old + Xs[:, j] @ r / n
            bj_new = soft_threshold(rho, lam)
            if bj_new != bj_old:
                np.add(r, Xs[:, j] * (bj_old - bj_new), out=r)
                beta[j] = bj_new
                max_delta = max(max_delta, abs(bj_new - bj_old))
        return max_delta

    def kkt_violation() -> float:
        if len(cols) == 0:
            return 0.0
        grad = Xs[:, cols].T @ r / n
        b = beta[cols]
        viol_zero = np.maximum(np.abs(grad) - lam, 0.0)
        viol_active = np.abs(grad - lam * np.sign(b))
        return float(np.max(np.where(b == 0.0, viol_zero, viol_active)))

    sweeps = 0
    while sweeps < max_sweeps:
        sweep(cols)
        sweeps += 1
        if kkt_violation() <= kkt_tol:
            return beta, sweeps
        # iterate on the active set until it stabilizes, then re-check all
        active = cols[beta[cols] != 0.0]
        while sweeps < max_sweeps and len(active):
            if sweep(active) <= kkt_tol * 1e-2:
                break
            sweeps += 1
        if kkt_violation() <= kkt_tol:
            return beta, sweeps
    raise NoConvergenceError(
        f"lasso coordinate descent did not reach KKT tolerance {kkt_tol:g} "
        f"within {max_sweeps} sweeps (lam={lam:g})"
    )


def fit_lasso(
    X,
    y,
    lam: float | None = None,
    *,
    max_sweeps: int = 10_000,
    kkt_tol: float = 1e-7,
    plugin_c: float = PLUGIN_C,
    plugin_gamma: float = PLUGIN_GAMMA,
) -> LassoFit:
    """Fit the lasso; ``lam=None`` selects the plug-in penalty.

    The intercept is unpenalized and recovered from the column means, so a
    constant outcome degenerates to the intercept-only fit rather than
    failing.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise InsufficientDataError(f"lasso needs at least 2 rows, got {n}")
    if len(y) != n:
        raise DimensionMismatchError(f"X has {n} rows but y has {len(y)}")
    Xs, x_mean, x_scale = standardize_columns(X)
    active_cols = np.sqrt(np.mean((X - x_mean) ** 2, axis=0)) > 0.0
    y_mean = y.mean()
    yc = y - y_mean
    if lam is None:
        lam = plugin_penalty(
            Xs, yc, c=plugin_c, gamma=plugin_gamma,
            active_cols=active_cols, max_sweeps=max_sweeps, kkt_tol=kkt_tol,
        )
    if lam < 0.0:
        raise ValueError(f"penalty must be nonnegative, got {lam}")
    beta_std, sweeps = _coordinate_descent(Xs, yc, lam, max_sweeps, kkt_tol, active_cols)
    coef = beta_std / x_scale
    intercept = y_mean - float(x_mean @ coef)
    return LassoFit(
        intercept=intercept,
        coef=coef,
        coef_std=beta_std,
        lam=float(lam),
        n_sweeps=sweeps,
        x_mean=x_mean,
        x_scale=x_scale,
    )


def plugin_penalty(
    Xs: np.ndarray,
    yc: np.ndarray,
    *,
    c: float = PLUGIN_C,
    gamma: float = PLUGIN_GAMMA,
    refits: int = PLUGIN_REFITS,
    active_cols: np.ndarray | None = None,
    max_sweeps: int = 10_000,
    kkt_tol: float = 1e-7,
) -> float:
    """Data-driven penalty c * sigma_r * Phi^inv(1 - gamma/(2p)) / sqrt(n).

    ``Xs``/``yc`` are the standardized features and centered outcome. The
    residual scale starts at the root mean square of ``yc`` and is refit
    ``refits`` times from lasso residuals at the current penalty.
    """
    from ..crossfit import normal_quantile

    n, p = Xs.shape
    if active_cols is None:
        active_cols = np.ones(p, dtype=bool)
    quantile = normal_quantile(1.0 - gamma / (2.0 * max(p, 1)))
    sigma_r = float(np.sqrt(np.mean(yc**2)))
    lam = c * sigma_r * quantile / np.sqrt(n)
    if sigma_r == 0.0:
        return 0.0
    for _ in range(refits):
        beta, _ = _coordinate_descent(Xs, yc, lam, max_sweeps, kkt_tol, active_cols)
        resid = yc - Xs @ beta
        sigma_r = float(np.sqrt(np.mean(resid**2)))
        lam = c * sigma_r * quantile / np.sqrt(n)
    return float(lam)


def lasso_kkt_violation(fit: LassoFit, X, y) -> float:
    """Largest KKT violation of a fit, measured in the standardized frame.

    For zero coefficients, max(|(1/n) X_j . r| - lam, 0); for active ones,
    |(1/n) X_j . r - lam sign(b_j)|.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    Xs = (X - fit.x_mean) / fit.x_scale
    r = (y - y.mean()) - Xs @ fit.coef_std
    n = len(y)
    grad = Xs.T @ r / n
    live = np.sqrt(np.mean((X - fit.x_mean) ** 2, axis=0)) > 0.0
    viol = np.where(
        fit.coef_std == 0.0,
        np.maximum(np.abs(grad) - fit.lam, 0.0),
        np.abs(grad - fit.lam * np.sign(fit.coef_std)),
    )
    return float(np.max(viol[live])) if live.any() else 0.0


# --- ordinary least squares / logistic (the oracle pair) ---


@dataclass(frozen=True)
class LinearFit:
    """Unpenalized least-squares fit."""

    intercept: float
    coef: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.coef)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected {self.n_features} feature columns, got {X.shape[1]}"
            )
        return self.intercept + X @ self.coef


def fit_ols(X, y) -> LinearFit:
    """Least squares with intercept via lstsq (minimum-norm on rank deficiency)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2:
        raise InsufficientDataError(f"least squares needs at least 2 rows, got {X.shape[0]}")
    design = np.column_stack([np.ones(X.shape[0]), X])
    params, *_ = np.linalg.lstsq(design, y, rcond=None)
    return LinearFit(intercept=float(params[0]), coef=params[1:])


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ez = np.exp(eta[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LogisticFit:
    """Unpenalized logistic fit; predictions are probabilities."""

    intercept: float
    coef: np.ndarray
    converged: bool

    @property
    def n_features(self) -> int:
        return len(self.coef)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected {self.n_features} feature columns, got {X.shape[1]}"
            )
        return _sigmoid(self.intercept + X @ self.coef)


def fit_logistic(X, y, *, max_iter: int = 100, tol: float = 1e-12, ridge: float = 1e-10) -> LogisticFit:
    """Logistic regression by Newton-Raphson with a tiny ridge for stability.

    Converges to machine precision on well-conditioned problems; on
    separable data the step-halving and ridge keep the fit finite (the
    returned probabilities saturate, which is the intended behavior for a
    nuisance learner feeding a trimmed propensity).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise InsufficientDataError(f"logistic regression needs at least 2 rows, got {n}")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("logistic regression requires a 0/1 response")
    design = np.column_stack([np.ones(n), X])
    ybar = y.mean()
    if ybar in (0.0, 1.0):
        raise SingularDesignError("logistic fit undefined: response is constant")
    params = np.zeros(p + 1)
    params[0] = np.log(ybar / (1.0 - ybar))
    converged = False
    for _ in range(max_iter):
        eta = design @ params
        mu = _sigmoid(eta)
        w = np.clip(mu * (1.0 - mu), 1e-12, None)
        grad = design.T @ (y - mu) / n
        hess = (design * w[:, None]).T @ design / n + ridge * np.eye(p + 1)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # halve until the penalized log-likelihood stops degrading
        step_size = 1.0
        ll_old = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
        for _ in range(30):
            trial = params + step_size * step
            eta_t = design @ trial
            ll_new = float(np.sum(y * eta_t - np.logaddexp(0.0, eta_t)))
            if ll_new >= ll_old - 1e-12:
                break
            step_size *= 0.5
        params = params + step_size * step
        if np.max(np.abs(step_size * step)) < tol:
            converged = True
            break
    return LogisticFit(intercept=float(params[0]), coef=params[1:], converged=converged)


# --- l1-penalized logistic (lasso propensities) ---


@dataclass(frozen=True)
class LogisticLassoFit:
    """l1-penalized logistic solution on standardized features."""

    intercept: float
    coef: np.ndarray
    coef_std: np.ndarray
    lam: float
    n_iter: int
    x_mean: np.ndarray
    x_scale: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.coef)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected {self.n_features} feature columns, got {X.shape[1]}"
            )
        return _sigmoid(self.intercept + X @ self.coef)


def fit_logistic_lasso(
    X,
    y,
    lam: float | None = None,
    *,
    max_iter: int = 2000,
    tol: float = 1e-9,
    plugin_c: float = PLUGIN_C,
    plugin_gamma: float = PLUGIN_GAMMA,
) -> LogisticLassoFit:
    """FISTA proximal-gradient solver for the l1-penalized logistic loss.

    Minimizes (1/n) sum[log(1 + exp(eta_i)) - y_i eta_i] + lam ||b||_1 with
    an unpenalized intercept, on standardized features. Step size 1/L with
    L from the exact largest eigenvalue of (1/4n) X'X (intercept included).
    ``lam=None`` uses the regression plug-in rule with the Bernoulli scale
    sqrt(ybar (1 - ybar)) in place of the residual scale.
    """
    from ..crossfit import normal_quantile

    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise InsufficientDataError(f"penalized logistic needs at least 2 rows, got {n}")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("penalized logistic requires a 0/1 response")
    Xs, x_mean, x_scale = standardize_columns(X)
    ybar = y.mean()
    if ybar in (0.0, 1.0):
        raise SingularDesignError("penalized logistic undefined: response is constant")
    if lam is None:
        sigma_b = np.sqrt(ybar * (1.0 - ybar))
        lam = plugin_c * sigma_b * normal_quantile(1.0 - plugin_gamma / (2.0 * max(p, 1))) / np.sqrt(n)

    design = np.column_stack([np.ones(n), Xs])
    gram = design.T @ design / (4.0 * n)
    lip = float(np.linalg.eigvalsh(gram)[-1])
    step = 1.0 / max(lip, 1e-12)

    params = np.zeros(p + 1)
    params[0] = np.log(ybar / (1.0 - ybar))
    momentum = params.copy()
    t_acc = 1.0
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        mu = _sigmoid(design @ momentum)
        grad = design.T @ (mu - y) / n
        new = momentum - step * grad
        slopes = new[1:]
        new[1:] = np.sign(slopes) * np.maximum(np.abs(slopes) - step * lam, 0.0)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2)) / 2.0
        momentum = new + ((t_acc - 1.0) / t_next) * (new - params)
        delta = float(np.max(np.abs(new - params)))
        params, t_acc = new, t_next
        if delta < tol:
            break
    coef_std = params[1:]
    coef = coef_std / x_scale
    intercept = float(params[0] - x_mean @ coef)
    return LogisticLassoFit(
        intercept=intercept,
        coef=coef,
        coef_std=coef_std,
        lam=float(lam),
        n_iter=n_iter,
        x_mean=x_mean,
        x_scale=x_scale,
    )
