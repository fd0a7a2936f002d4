"""Neyman-orthogonal score functions and their closed-form roots.

The interactive (fully heterogeneous) model is

    Y = g0(D, Z) + zeta,   E[zeta | Z, D] = 0,
    D = m0(Z) + nu,        E[nu | Z] = 0,      D in {0, 1},

with target either the average treatment effect (ATE)
``E[g0(1,Z) - g0(0,Z)]`` or the average treatment effect on the treated
(ATTE) ``E[g0(1,Z) - g0(0,Z) | D = 1]``. Both targets come with doubly
robust scores whose expectation has a vanishing Gateaux derivative in the
nuisances at the truth; :func:`gateaux_derivative` checks that numerically
via central finite differences. ``naive_score`` is the non-orthogonal
plug-in contrast kept around as a foil for that check.

The partially linear model score (constant effect theta,
``psi = (Y - l(Z) - theta (D - m(Z))) (D - m(Z))`` with l0 = E[Y|Z]) is an
extension beyond the two displayed scores and is flagged as such in the
docs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import (
    DegenerateResidualVarianceError,
    InvalidCutoffsError,
    NoTreatedInFoldError,
    PerturbationEscapesRangeError,
    PropensityOutOfRangeError,
)

SCORE_KINDS = ("ate", "atte", "plm")


def _check_propensity(m, name: str = "m") -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.size and (np.min(m) <= 0.0 or np.max(m) >= 1.0):
        raise PropensityOutOfRangeError(f"{name} must lie strictly inside (0, 1)")
    return m


def ate_score(y, d, g0, g1, m, theta):
    """Doubly robust ATE score.

    psi = (g1 - g0) + d (y - g1) / m - (1 - d) (y - g0) / (1 - m) - theta.

    Vectorized over all arguments; ``m`` must lie strictly inside (0, 1),
    which trimming guarantees upstream.
    """
    m = _check_propensity(m)
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    g0 = np.asarray(g0, dtype=np.float64)
    g1 = np.asarray(g1, dtype=np.float64)
    return (g1 - g0) + d * (y - g1) / m - (1.0 - d) * (y - g0) / (1.0 - m) - theta


def atte_score(y, d, g0, m_z, m_bar, theta):
    """Doubly robust ATTE score.

    psi = d (y - g0) / m_bar
        - m_z (1 - d) (y - g0) / ((1 - m_z) m_bar)
        - theta d / m_bar,

    where ``m_z`` is the propensity at Z and ``m_bar`` the treated fraction
    estimated on the training fold.
    """
    m_z = _check_propensity(m_z, "m_z")
    if not 0.0 < float(m_bar) < 1.0:
        raise PropensityOutOfRangeError(f"m_bar must lie in (0, 1), got {m_bar}")
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    g0 = np.asarray(g0, dtype=np.float64)
    resid = y - g0
    return d * resid / m_bar - m_z * (1.0 - d) * resid / ((1.0 - m_z) * m_bar) - theta * d / m_bar


def plm_score(y, d, l_hat, m_hat, theta):
    """Orthogonal partially-linear-model score
    (y - l)(d - m) - theta (d - m)^2, written as a residual product."""
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    v = d - np.asarray(m_hat, dtype=np.float64)
    return (y - np.asarray(l_hat, dtype=np.float64) - theta * v) * v


def naive_score(g0, g1, theta):
    """Non-orthogonal plug-in contrast g1 - g0 - theta (used as a foil in
    orthogonality checks and the debiasing-contrast experiment)."""
    return np.asarray(g1, dtype=np.float64) - np.asarray(g0, dtype=np.float64) - theta


def solve_theta(kind: str, y, d, nuisance) -> float:
    """Exact root of the fold-level empirical moment (1/n) sum psi = 0.

    ate:  the score is linear in theta with slope -1, so the root is the
          fold mean of the theta-free part.
    atte: the 1/m_bar factors cancel, leaving
          theta = sum[d (y-g0) - m (1-d)(y-g0) / (1-m)] / sum(d).
    plm:  theta = sum[(y - l)(d - m)] / sum[(d - m)^2].
    """
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if kind == "ate":
        return float(np.mean(ate_score(y, d, nuisance.g0_hat, nuisance.g1_hat, nuisance.m_hat, 0.0)))
    if kind == "atte":
        n_treated = d.sum()
        if n_treated == 0:
            raise NoTreatedInFoldError("ATTE root undefined: fold contains no treated observations")
        resid = y - nuisance.g0_hat
        m = nuisance.m_hat
        num = np.sum(d * resid - m * (1.0 - d) * resid / (1.0 - m))
        return float(num / n_treated)
    if kind == "plm":
        v = d - nuisance.m_hat
        den = np.sum(v * v)
        if den <= 0.0:
            raise DegenerateResidualVarianceError(
                "PLM root undefined: treatment residuals have zero sum of squares"
            )
        return float(np.sum((y - nuisance.l_hat) * v) / den)
    raise ValueError(f"unknown score kind {kind!r}; expected one of {SCORE_KINDS}")


def score_values(kind: str, y, d, nuisance, theta: float) -> np.ndarray:
    """Per-observation score values at ``theta`` with the given nuisances."""
    if kind == "ate":
        return ate_score(y, d, nuisance.g0_hat, nuisance.g1_hat, nuisance.m_hat, theta)
    if kind == "atte":
        return atte_score(y, d, nuisance.g0_hat, nuisance.m_hat, nuisance.m_bar, theta)
    if kind == "plm":
        return plm_score(y, d, nuisance.l_hat, nuisance.m_hat, theta)
    raise ValueError(f"unknown score kind {kind!r}; expected one of {SCORE_KINDS}")


def trim_propensity(m_raw, lo: float, hi: float) -> tuple[np.ndarray, int]:
    """Clamp propensities into [lo, hi] and count how many were moved.

    The count is a diagnostic for how much inverse-probability weight the
    trimming removed.
    """
    if not 0.0 < lo < hi < 1.0:
        raise InvalidCutoffsError(f"cutoffs must satisfy 0 < lo < hi < 1, got ({lo}, {hi})")
    m_raw = np.asarray(m_raw, dtype=np.float64)
    n_clamped = int(np.count_nonzero((m_raw < lo) | (m_raw > hi)))
    return np.clip(m_raw, lo, hi), n_clamped


@dataclass(frozen=True)
class ScoreInputs:
    """A sample with the nuisance values needed to evaluate a score.

    Used by the orthogonality checker with *true* nuisances from a synthetic
    data-generating process; ``l`` is only needed for the PLM score.
    """

    y: np.ndarray
    d: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    m: np.ndarray
    m_bar: float = 0.5
    l: np.ndarray | None = None

    def mean_score(self, kind: str, theta: float) -> float:
        if kind == "ate":
            psi = ate_score(self.y, self.d, self.g0, self.g1, self.m, theta)
        elif kind == "atte":
            psi = atte_score(self.y, self.d, self.g0, self.m, self.m_bar, theta)
        elif kind == "plm":
            psi = plm_score(self.y, self.d, self.l, self.m, theta)
        elif kind == "naive":
            psi = naive_score(self.g0, self.g1, theta)
        else:
            raise ValueError(f"unknown score kind {kind!r}")
        return float(np.mean(psi))


_PERTURBABLE = ("g0", "g1", "m", "m_bar", "l")


def _perturb(sample: ScoreInputs, direction: Mapping[str, object], t: float) -> ScoreInputs:
    changes = {}
    for name, h in direction.items():
        if name not in _PERTURBABLE:
            raise ValueError(f"unknown perturbation direction {name!r}; expected one of {_PERTURBABLE}")
        base = getattr(sample, name)
        if base is None:
            raise ValueError(f"sample has no {name!r} component to perturb")
        if name == "m_bar":
            value = float(base) + t * float(h)
            if not 0.0 < value < 1.0:
                raise PerturbationEscapesRangeError(
                    f"perturbed m_bar = {value:.6g} leaves (0, 1) at step {t}"
                )
        else:
            value = np.asarray(base, dtype=np.float64) + t * np.asarray(h, dtype=np.float64)
            if name == "m" and value.size and (value.min() <= 0.0 or value.max() >= 1.0):
                raise PerturbationEscapesRangeError(
                    f"perturbed propensity leaves (0, 1) at step {t}: "
                    f"range [{value.min():.6g}, {value.max():.6g}]"
                )
        changes[name] = value
    return replace(sample, **changes)


def gateaux_derivative(
    kind: str,
    theta0: float,
    sample: ScoreInputs,
    direction: Mapping[str, object],
    t: float = 1e-3,
) -> float:
    """Central-finite-difference directional derivative of the mean score.

    Computes [mean psi(theta0, eta + t h) - mean psi(theta0, eta - t h)] / (2t)
    over the sample, where ``direction`` maps nuisance names (subset of
    ``g0, g1, m, m_bar, l``) to perturbations (scalars or arrays). At the
    true nuisances an orthogonal score gives a derivative that shrinks to 0
    as the sample grows; the naive score does not. Re-running at ``t/2``
    (Richardson check) should leave the value essentially unchanged when the
    step is trusted.
    """
    if not 0.0 < t <= 0.1:
        raise ValueError(f"step t must lie in (0, 0.1], got {t}")
    up = _perturb(sample, direction, +t).mean_score(kind, theta0)
    down = _perturb(sample, direction, -t).mean_score(kind, theta0)
    return (up - down) / (2.0 * t)


__all__ = [
    "SCORE_KINDS",
    "ScoreInputs",
    "ate_score",
    "atte_score",
    "plm_score",
    "naive_score",
    "solve_theta",
    "score_values",
    "trim_propensity",
    "gateaux_derivative",
]
