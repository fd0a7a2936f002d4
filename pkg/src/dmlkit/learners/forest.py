"""Random forest built on the CART grower.

Per-tree randomness comes from a generator seeded with ``[seed, tree_index]``
(a fixed counter derivation), so fits are reproducible bit-for-bit no matter
how many workers build trees. The forest prediction is the exact arithmetic
mean of its trees' predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatchError, InsufficientDataError
from .tree import TreeNode, grow_tree, predict_tree


def default_mtry(p: int, task: str) -> int:
    """ceil(p/3) features per split for regression, ceil(sqrt(p)) for probability."""
    return min(p, math.ceil(p / 3) if task == "regression" else math.ceil(math.sqrt(p)))


@dataclass
class ForestModel:
    trees: list[TreeNode]
    n_features: int
    task: str
    diagnostics: dict = field(default_factory=dict)

    def tree_predictions(self, X: np.ndarray) -> np.ndarray:
        """(n_trees, n_rows) matrix of individual tree predictions."""
        return np.stack([predict_tree(t, X) for t in self.trees])

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
        pred = self.tree_predictions(X).mean(axis=0)
        if self.task == "probability":
            pred = np.clip(pred, 0.0, 1.0)
        return pred


def fit_random_forest(
    X,
    y,
    *,
    task: str = "regression",
    n_trees: int = 1000,
    min_leaf: int = 5,
    max_depth: int | None = None,
    bootstrap: bool = True,
    mtry: int | None = None,
    seed: int = 0,
) -> ForestModel:
    """Fit a forest of ``n_trees`` CART trees.

    With ``bootstrap=False`` and ``mtry`` equal to the feature count, each
    tree degenerates to the deterministic full CART fit.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise InsufficientDataError(f"forest needs at least 2 rows, got {n}")
    if len(y) != n:
        raise DimensionMismatchError(f"X has {n} rows but y has {len(y)}")
    if mtry is None:
        mtry = default_mtry(p, task)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            grow_tree(X[rows], y[rows], min_leaf=min_leaf, max_depth=max_depth, mtry=mtry, rng=rng)
        )
    return ForestModel(trees=trees, n_features=p, task=task, diagnostics={"n_trees": n_trees, "mtry": mtry})
