"""CART regression trees with weakest-link cost-complexity pruning.

Trees always split on squared error. For a 0/1 target this is equivalent to
splitting on Gini impurity (node SSE = n * pbar * (1 - pbar) is half the
weighted Gini), so the same machinery serves both the regression and the
probability task. Splits are only accepted when they strictly reduce
training SSE; ties between candidate splits break toward the lowest feature
index and then the lowest threshold, making growth deterministic.

Pruning follows the classic cost-complexity scheme: the weakest-link alpha
sequence of the full tree defines candidate penalties (geometric midpoints),
the penalty is chosen by cross-validated MSE, and the full tree is pruned at
the winner. Ties in CV error go to the larger penalty, i.e. the smaller tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import make_partition
from ..errors import DimensionMismatchError, InsufficientDataError

_GAIN_EPS = 1e-12


@dataclass
class TreeNode:
    n: int
    value: float
    sse: float
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def copy(self) -> "TreeNode":
        return TreeNode(
            n=self.n,
            value=self.value,
            sse=self.sse,
            feature=self.feature,
            threshold=self.threshold,
            left=self.left.copy() if self.left else None,
            right=self.right.copy() if self.right else None,
        )


def _node_stats(y: np.ndarray) -> tuple[float, float]:
    mean = float(y.mean())
    return mean, float(np.sum((y - mean) ** 2))


def _best_split(X, y, feature_ids, min_leaf):
    """Exhaustive SSE split search; returns (gain, feature, threshold) or None."""
    n = len(y)
    _, parent_sse = _node_stats(y)
    if parent_sse <= _GAIN_EPS or n < 2 * min_leaf:
        return None
    total = float(y.sum())
    total2 = float(np.sum(y * y))
    best = None
    for j in feature_ids:
        xj = X[:, j]
        order = np.argsort(xj, kind="stable")
        xs = xj[order]
        ys = y[order]
        csum = np.cumsum(ys)[:-1]
        csum2 = np.cumsum(ys * ys)[:-1]
        n_left = np.arange(1, n)
        valid = xs[:-1] < xs[1:]
        n_right = n - n_left
        valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        sse_left = csum2 - csum**2 / n_left
        sse_right = (total2 - csum2) - (total - csum) ** 2 / n_right
        gains = np.where(valid, parent_sse - sse_left - sse_right, -np.inf)
        i = int(np.argmax(gains))
        gain = float(gains[i])
        if gain > _GAIN_EPS * max(parent_sse, 1.0) and (best is None or gain > best[0]):
            thr = (xs[i] + xs[i + 1]) / 2.0
            if thr >= xs[i + 1]:  # midpoint rounded up to the right value
                thr = xs[i]
            best = (gain, j, float(thr))
    return best


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    *,
    min_leaf: int = 5,
    max_depth: int | None = None,
    mtry: int | None = None,
    rng: np.random.Generator | None = None,
) -> TreeNode:
    """Grow an unpruned CART tree.

    ``mtry`` draws that many candidate features per node (sampled without
    replacement from ``rng``, then sorted so tie-breaking matches the full
    search when mtry = p). ``max_depth=None`` grows until leaves are pure or
    hit ``min_leaf``.
    """
    p = X.shape[1]

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        yi = y[idx]
        value, sse = _node_stats(yi)
        node = TreeNode(n=len(idx), value=value, sse=sse)
        if max_depth is not None and depth >= max_depth:
            return node
        if mtry is not None and mtry < p:
            feature_ids = np.sort(rng.choice(p, size=mtry, replace=False))
        else:
            feature_ids = range(p)
        found = _best_split(X[idx], yi, feature_ids, min_leaf)
        if found is None:
            return node
        _, node.feature, node.threshold = found
        go_left = X[idx, node.feature] <= node.threshold
        node.left = build(idx[go_left], depth + 1)
        node.right = build(idx[~go_left], depth + 1)
        return node

    return build(np.arange(len(y)), 0)


def predict_tree(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])

    def route(node: TreeNode, idx: np.ndarray):
        if len(idx) == 0:
            return
        if node.is_leaf:
            out[idx] = node.value
            return
        go_left = X[idx, node.feature] <= node.threshold
        route(node.left, idx[go_left])
        route(node.right, idx[~go_left])

    route(root, np.arange(X.shape[0]))
    return out


def _subtree_stats(node: TreeNode) -> tuple[float, int]:
    """(sum of leaf SSEs, number of leaves) of the subtree."""
    if node.is_leaf:
        return node.sse, 1
    sl, nl = _subtree_stats(node.left)
    sr, nr = _subtree_stats(node.right)
    return sl + sr, nl + nr


def prune_at(root: TreeNode, alpha: float) -> TreeNode:
    """Smallest subtree minimizing SSE + alpha * #leaves (ties prune)."""
    tree = root.copy()

    def collapse(node: TreeNode) -> tuple[float, int]:
        if node.is_leaf:
            return node.sse, 1
        sl, nl = collapse(node.left)
        sr, nr = collapse(node.right)
        leaf_sse, leaves = sl + sr, nl + nr
        g = (node.sse - leaf_sse) / (leaves - 1)
        if g <= alpha:
            node.left = node.right = None
            node.feature = -1
            return node.sse, 1
        return leaf_sse, leaves

    collapse(tree)
    return tree


def weakest_link_alphas(root: TreeNode) -> list[float]:
    """Increasing critical penalties of the weakest-link pruning sequence."""
    tree = root.copy()
    alphas = []
    while not tree.is_leaf:
        links = []

        def visit(node: TreeNode):
            if node.is_leaf:
                return
            leaf_sse, leaves = _subtree_stats(node)
            links.append((node.sse - leaf_sse) / (leaves - 1))
            visit(node.left)
            visit(node.right)

        visit(tree)
        alpha = min(links)
        alphas.append(alpha)
        tree = prune_at(tree, alpha)
    return alphas


def n_leaves(root: TreeNode) -> int:
    return _subtree_stats(root)[1]


def select_alpha_by_cv(
    X: np.ndarray,
    y: np.ndarray,
    *,
    min_leaf: int,
    max_depth: int | None,
    cv_folds: int,
    seed: int,
    alphas: list[float],
) -> float:
    """Pick the pruning penalty with the lowest cross-validated MSE.

    Candidates are 0, the geometric midpoints of consecutive critical
    penalties, and the largest critical penalty (root-only tree). Ties go to
    the larger penalty.
    """
    if not alphas:
        return 0.0
    candidates = [0.0]
    candidates += [float(np.sqrt(a * b)) for a, b in zip(alphas, alphas[1:])]
    candidates.append(alphas[-1])
    n = len(y)
    folds = min(cv_folds, n)
    if folds < 2:
        return 0.0
    partition = make_partition(n, folds, seed)
    sse = np.zeros(len(candidates))
    for k in range(1, folds + 1):
        train = partition.complement_indices(k)
        test = partition.fold_indices(k)
        subtree = grow_tree(X[train], y[train], min_leaf=min_leaf, max_depth=max_depth)
        for c, alpha in enumerate(candidates):
            pred = predict_tree(prune_at(subtree, alpha), X[test])
            sse[c] += float(np.sum((y[test] - pred) ** 2))
    best = max(
        range(len(candidates)),
        key=lambda c: (-sse[c], candidates[c]),
    )
    return candidates[best]


@dataclass
class RegressionTreeModel:
    """A fitted (possibly pruned) CART tree."""

    root: TreeNode
    n_features: int
    task: str
    alpha: float
    diagnostics: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected {self.n_features} feature columns, got {X.shape[1]}"
            )
        pred = predict_tree(self.root, X)
        if self.task == "probability":
            pred = np.clip(pred, 0.0, 1.0)
        return pred


def fit_regression_tree(
    X,
    y,
    *,
    task: str = "regression",
    min_leaf: int = 5,
    max_depth: int | None = None,
    cv_folds: int = 10,
    alpha: float | None = None,
    seed: int = 0,
) -> RegressionTreeModel:
    """Grow a CART tree and prune it.

    ``alpha=None`` selects the penalty by ``cv_folds``-fold cross-validation
    (skipped, leaving the full tree, when ``cv_folds`` < 2 or the sample is
    smaller than the fold count); an explicit ``alpha`` prunes directly.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2:
        raise InsufficientDataError(f"tree needs at least 2 rows, got {X.shape[0]}")
    if len(y) != X.shape[0]:
        raise DimensionMismatchError(f"X has {X.shape[0]} rows but y has {len(y)}")
    root = grow_tree(X, y, min_leaf=min_leaf, max_depth=max_depth)
    if alpha is None and cv_folds >= 2 and not root.is_leaf:
        alpha = select_alpha_by_cv(
            X,
            y,
            min_leaf=min_leaf,
            max_depth=max_depth,
            cv_folds=cv_folds,
            seed=seed,
            alphas=weakest_link_alphas(root),
        )
    alpha = 0.0 if alpha is None else float(alpha)
    pruned = prune_at(root, alpha) if alpha > 0.0 else root
    in_sample = predict_tree(pruned, X)
    return RegressionTreeModel(
        root=pruned,
        n_features=X.shape[1],
        task=task,
        alpha=alpha,
        diagnostics={
            "n_leaves": n_leaves(pruned),
            "in_sample_mse": float(np.mean((y - in_sample) ** 2)),
        },
    )
