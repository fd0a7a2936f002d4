"""Gradient boosting with shallow regression trees and squared-error loss.

Each round fits a depth-limited CART tree to the current residuals and adds
it scaled by the learning rate. Because every tree is a least-squares fit of
the residuals, the training loss is non-increasing round over round for any
learning rate in (0, 2); the staged training losses are kept in the
diagnostics so that can be audited.

When the learning rate or the round count is not pinned, both are chosen by
K-fold cross-validation over a small grid: for each rate the model is grown
once per fold to ``max_rounds`` while held-out error is recorded at every
stage, and the (rate, rounds) pair with the lowest CV MSE wins. Ties go to
the earlier grid entry and then to fewer rounds. The probability task is
boosted on the 0/1 labels with the same squared-error loss, with
predictions clamped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import make_partition
from ..errors import DimensionMismatchError, InsufficientDataError
from .tree import TreeNode, grow_tree, predict_tree

DEFAULT_LR_GRID = (0.05, 0.1, 0.3)


@dataclass
class BoostingModel:
    init_value: float
    trees: list[TreeNode]
    learning_rate: float
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
        pred = np.full(X.shape[0], self.init_value)
        for tree in self.trees:
            pred += self.learning_rate * predict_tree(tree, X)
        if self.task == "probability":
            pred = np.clip(pred, 0.0, 1.0)
        return pred


def _boost(X, y, lr, n_rounds, max_depth, min_leaf, X_track=None):
    """Run boosting; returns (init, trees, staged train MSE, staged tracked preds).

    ``X_track`` rows get their staged predictions recorded (used for CV
    held-out error without refitting per round count).
    """
    init = float(y.mean())
    fit_pred = np.full(len(y), init)
    track_pred = None if X_track is None else np.full(X_track.shape[0], init)
    staged_track = []
    trees = []
    train_losses = [float(np.mean((y - fit_pred) ** 2))]
    for _ in range(n_rounds):
        resid = y - fit_pred
        tree = grow_tree(X, resid, min_leaf=min_leaf, max_depth=max_depth)
        trees.append(tree)
        fit_pred += lr * predict_tree(tree, X)
        train_losses.append(float(np.mean((y - fit_pred) ** 2)))
        if track_pred is not None:
            track_pred += lr * predict_tree(tree, X_track)
            staged_track.append(track_pred.copy())
        if tree.is_leaf:  # residuals exhausted; further rounds are no-ops
            break
    return init, trees, train_losses, staged_track


def fit_boosting(
    X,
    y,
    *,
    task: str = "regression",
    learning_rate: float | None = None,
    n_rounds: int | None = None,
    lr_grid: tuple[float, ...] = DEFAULT_LR_GRID,
    max_rounds: int = 200,
    max_depth: int = 2,
    min_leaf: int = 5,
    cv_folds: int = 10,
    seed: int = 0,
) -> BoostingModel:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise InsufficientDataError(f"boosting needs at least 2 rows, got {n}")
    if len(y) != n:
        raise DimensionMismatchError(f"X has {n} rows but y has {len(y)}")

    cv_mse = None
    if learning_rate is None or n_rounds is None:
        rates = lr_grid if learning_rate is None else (learning_rate,)
        round_candidates = range(1, max_rounds + 1) if n_rounds is None else (min(n_rounds, max_rounds),)
        folds = min(cv_folds, n)
        if folds < 2:
            learning_rate = rates[0]
            n_rounds = n_rounds if n_rounds is not None else max_rounds
        else:
            partition = make_partition(n, folds, seed)
            best = None  # (mse, grid position, rounds, rate)
            for pos, lr in enumerate(rates):
                sse = np.zeros(max_rounds)
                n_held = 0
                for k in range(1, folds + 1):
                    tr = partition.complement_indices(k)
                    te = partition.fold_indices(k)
                    _, _, _, staged = _boost(
                        X[tr], y[tr], lr, max_rounds, max_depth, min_leaf, X_track=X[te]
                    )
                    n_held += len(te)
                    last = staged[-1] if staged else np.full(len(te), y[tr].mean())
                    for r in range(max_rounds):
                        pred = staged[r] if r < len(staged) else last
                        sse[r] += float(np.sum((y[te] - pred) ** 2))
                for r in round_candidates:
                    cand = (sse[r - 1] / n_held, pos, r, lr)
                    if best is None or cand[:3] < best[:3]:
                        best = cand
            cv_mse, _, n_rounds, learning_rate = best

    init, trees, train_losses, _ = _boost(X, y, learning_rate, n_rounds, max_depth, min_leaf)
    return BoostingModel(
        init_value=init,
        trees=trees,
        learning_rate=float(learning_rate),
        n_features=X.shape[1],
        task=task,
        diagnostics={
            "staged_train_mse": train_losses,
            "n_rounds": len(trees),
            "cv_mse": cv_mse,
        },
    )
