"""Core data containers: dataset, fold partition, and result records.

All containers are frozen dataclasses wrapping read-only numpy arrays, so
they are safe to share across concurrent workers. Randomness is confined to
:func:`make_partition`, which shuffles with numpy's PCG64 generator
(``np.random.default_rng``) so a given ``(N, K, seed)`` always produces the
identical assignment vector on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateArmError,
    KTooLargeError,
    KTooSmallError,
    LengthMismatchError,
    NonBinaryTreatmentError,
    NonFiniteValueError,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def derive_seed(*parts: int) -> int:
    """Mix integer components into a reproducible 64-bit seed.

    Uses numpy's SeedSequence hashing so derived streams are well separated
    and stable across platforms and worker counts.
    """
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Dataset:
    """Observations (Y_i, D_i, Z_i): outcome, binary treatment, covariates.

    Invariants (checked on construction): equal lengths, treatments exactly
    0/1 with both arms non-empty, and no NaN/inf anywhere.
    """

    outcomes: np.ndarray
    treatments: np.ndarray
    covariates: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=np.float64)
        d = np.asarray(self.treatments)
        z = np.asarray(self.covariates, dtype=np.float64)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        if z.ndim != 2:
            raise LengthMismatchError(f"covariates must be 2-dimensional, got ndim={z.ndim}")
        if not (len(y) == len(d) == z.shape[0]):
            raise LengthMismatchError(
                f"column lengths differ: outcomes={len(y)}, treatments={len(d)}, covariates={z.shape[0]}"
            )
        if not np.all(np.isfinite(y)):
            raise NonFiniteValueError("outcomes contain non-finite values")
        if not np.all(np.isfinite(z)):
            raise NonFiniteValueError("covariates contain non-finite values")
        d_float = np.asarray(d, dtype=np.float64)
        if not np.all(np.isin(d_float, (0.0, 1.0))):
            bad = d_float[~np.isin(d_float, (0.0, 1.0))]
            raise NonBinaryTreatmentError(f"treatment values must be 0 or 1, found {bad[:5]}")
        d_int = d_float.astype(np.int64)
        if d_int.sum() == 0:
            raise DegenerateArmError("no treated observations (all D = 0)")
        if d_int.sum() == len(d_int):
            raise DegenerateArmError("no untreated observations (all D = 1)")
        if self.feature_names is not None and len(self.feature_names) != z.shape[1]:
            raise LengthMismatchError(
                f"{len(self.feature_names)} feature names for {z.shape[1]} covariate columns"
            )
        object.__setattr__(self, "outcomes", _frozen(y))
        object.__setattr__(self, "treatments", _frozen(d_int))
        object.__setattr__(self, "covariates", _frozen(z))
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def p(self) -> int:
        return self.covariates.shape[1]


def validate_dataset(
    outcomes: Iterable[float],
    treatments: Iterable[float],
    covariates,
    feature_names: Sequence[str] | None = None,
) -> Dataset:
    """Validate raw columns and return a :class:`Dataset`.

    Raises LengthMismatchError, NonBinaryTreatmentError, DegenerateArmError
    or NonFiniteValueError when the inputs violate the dataset invariants.
    """
    return Dataset(
        outcomes=np.asarray(list(outcomes) if not isinstance(outcomes, np.ndarray) else outcomes, dtype=np.float64),
        treatments=np.asarray(list(treatments) if not isinstance(treatments, np.ndarray) else treatments),
        covariates=np.asarray(covariates, dtype=np.float64),
        feature_names=tuple(feature_names) if feature_names is not None else None,
    )


@dataclass(frozen=True)
class FoldPartition:
    """A K-way random partition of observation indices.

    ``assignments[i]`` is the fold index of observation ``i``, in ``1..K``.
    Fold sizes differ by at most one; the first ``N mod K`` folds take the
    remainder.
    """

    assignments: np.ndarray
    K: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", _frozen(np.asarray(self.assignments, dtype=np.int64)))

    @property
    def n(self) -> int:
        return len(self.assignments)

    def fold_indices(self, k: int) -> np.ndarray:
        """Indices of observations in fold ``k`` (ascending)."""
        return np.flatnonzero(self.assignments == k)

    def complement_indices(self, k: int) -> np.ndarray:
        """Indices of observations outside fold ``k`` (ascending)."""
        return np.flatnonzero(self.assignments != k)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.K + 1)[1:]


def make_partition(N: int, K: int, seed: int) -> FoldPartition:
    """Draw a uniform-random balanced K-fold partition of ``{0..N-1}``.

    Deterministic in ``seed``: indices are shuffled with PCG64 and sliced
    contiguously, with the first ``N mod K`` folds one element larger.
    """
    if K < 2:
        raise KTooSmallError(f"need at least 2 folds, got K={K}")
    if K > N:
        raise KTooLargeError(f"K={K} folds exceed N={N} observations")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(N)
    sizes = np.full(K, N // K, dtype=np.int64)
    sizes[: N % K] += 1
    assignments = np.empty(N, dtype=np.int64)
    start = 0
    for k, size in enumerate(sizes, start=1):
        assignments[perm[start : start + size]] = k
        start += size
    return FoldPartition(assignments=assignments, K=K, seed=seed)


@dataclass(frozen=True)
class NuisanceEstimates:
    """Fitted nuisances evaluated on one fold (interactive model).

    ``g0_hat``/``g1_hat`` are the arm-specific outcome regressions,
    ``m_hat`` the trimmed propensity predictions, and ``m_bar`` the
    training-fold treatment mean.
    """

    g0_hat: np.ndarray
    g1_hat: np.ndarray
    m_hat: np.ndarray
    m_bar: float

    def __post_init__(self):
        g0 = np.asarray(self.g0_hat, dtype=np.float64)
        g1 = np.asarray(self.g1_hat, dtype=np.float64)
        m = np.asarray(self.m_hat, dtype=np.float64)
        if not (len(g0) == len(g1) == len(m)):
            raise LengthMismatchError(
                f"nuisance vectors differ in length: {len(g0)}, {len(g1)}, {len(m)}"
            )
        if len(m) and (m.min() <= 0.0 or m.max() >= 1.0):
            raise ValueError("m_hat entries must lie strictly inside (0, 1) after trimming")
        if not 0.0 < self.m_bar < 1.0:
            raise ValueError(f"m_bar must lie in (0, 1), got {self.m_bar}")
        object.__setattr__(self, "g0_hat", _frozen(g0))
        object.__setattr__(self, "g1_hat", _frozen(g1))
        object.__setattr__(self, "m_hat", _frozen(m))


@dataclass(frozen=True)
class PlmNuisances:
    """Fitted nuisances on one fold for the partially linear model:
    conditional outcome mean ``l_hat`` = E[Y|Z] and propensity ``m_hat``."""

    l_hat: np.ndarray
    m_hat: np.ndarray

    def __post_init__(self):
        l = np.asarray(self.l_hat, dtype=np.float64)
        m = np.asarray(self.m_hat, dtype=np.float64)
        if len(l) != len(m):
            raise LengthMismatchError(f"nuisance vectors differ in length: {len(l)}, {len(m)}")
        object.__setattr__(self, "l_hat", _frozen(l))
        object.__setattr__(self, "m_hat", _frozen(m))


@dataclass(frozen=True)
class EstimateReport:
    """Result of one full cross-fitting pass."""

    theta_hat: float
    sigma_hat: float
    ci_lo: float
    ci_hi: float
    alpha: float
    per_fold_thetas: tuple[float, ...]
    n_trimmed: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "per_fold_thetas", tuple(float(t) for t in self.per_fold_thetas))


@dataclass(frozen=True)
class AggregateReport:
    """Aggregates over S repeated-split estimates.

    Retains every per-split report for audit alongside the mean/median
    point estimates and the split-adjusted standard errors.
    """

    thetas: tuple[float, ...]
    sigmas: tuple[float, ...]
    mean_theta: float
    median_theta: float
    sigma_mean: float
    sigma_median: float
    S: int
    splits: tuple[EstimateReport, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if len(self.thetas) != self.S or len(self.sigmas) != self.S:
            raise LengthMismatchError(
                f"S={self.S} but {len(self.thetas)} thetas / {len(self.sigmas)} sigmas"
            )
