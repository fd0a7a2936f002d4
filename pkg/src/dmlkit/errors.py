"""Exception hierarchy for dmlkit.

Every failure mode raised by the library is a subclass of :class:`DmlkitError`
so callers can catch library errors without catching programming mistakes.
The CLI maps the three top-level groups to distinct exit codes.
"""


class DmlkitError(Exception):
    """Base class for all dmlkit errors."""


# --- dataset validation ---

class LengthMismatchError(DmlkitError):
    """Input columns do not share a common length."""


class NonBinaryTreatmentError(DmlkitError):
    """Treatment column contains values other than 0 and 1."""


class DegenerateArmError(DmlkitError):
    """One treatment arm is empty."""


class NonFiniteValueError(DmlkitError):
    """Outcomes or covariates contain NaN or infinity."""


# --- fold partitioning ---

class KTooSmallError(DmlkitError):
    """Fewer than two folds requested."""


class KTooLargeError(DmlkitError):
    """More folds requested than observations."""


# --- learners ---

class InsufficientDataError(DmlkitError):
    """Too few rows to fit the requested learner."""


class SingularDesignError(DmlkitError):
    """Design matrix cannot support the requested fit."""


class DimensionMismatchError(DmlkitError):
    """Prediction input has a different column count than the training data."""


class NoConvergenceError(DmlkitError):
    """Iterative solver exhausted its iteration budget."""


class EmptyCandidatesError(DmlkitError):
    """Best-method selection received no candidate losses."""


# --- scores ---

class PropensityOutOfRangeError(DmlkitError):
    """A propensity value is outside the open interval (0, 1)."""


class InvalidCutoffsError(DmlkitError):
    """Trimming cutoffs do not satisfy 0 < lo < hi < 1."""


class NoTreatedInFoldError(DmlkitError):
    """Treated-effect fold root is undefined: no treated observations."""


class DegenerateResidualVarianceError(DmlkitError):
    """Partially linear root is undefined: zero treatment-residual variance."""


class PerturbationEscapesRangeError(DmlkitError):
    """A nuisance perturbation pushes the propensity outside (0, 1)."""


class OutOfDomainError(DmlkitError):
    """Quantile requested for a probability outside (0, 1)."""


# --- cross-fitting ---

class ArmMissingInTrainingFoldError(DmlkitError):
    """A training complement lacks treated or untreated rows."""


# --- CLI ---

class ConfigError(DmlkitError):
    """Invalid or missing configuration; message names the offending key."""


class DataError(DmlkitError):
    """Invalid input data; message names the offending column."""


class PipelineError(DmlkitError):
    """Estimation pipeline failed; message names the failing stage."""
