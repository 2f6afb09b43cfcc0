"""Exception hierarchy shared across the package.

Every error carries a machine-readable ``code`` (the class name) and an
optional ``context`` dict so the CLI can emit structured diagnostics.
"""

from __future__ import annotations


def _jsonable(value):
    if isinstance(value, (int, float, str, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return str(value)


class SrcreError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_payload(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "context": {k: _jsonable(v) for k, v in self.context.items()},
        }


# ---------------------------------------------------------------------------
# Data loading / validation
# ---------------------------------------------------------------------------

class DataError(SrcreError):
    """Invalid or inconsistent input data."""


class MissingColumn(DataError):
    """A required column is absent from an input file."""


class NonContiguousPeriods(DataError):
    """Period labels do not form a contiguous integer run."""


class EmptyClusterPeriod(DataError):
    """Some cluster has no records for one of the periods."""


class NonFiniteValue(DataError):
    """An outcome, covariate, or weight is NaN or infinite."""


class InvalidAdoptionTime(DataError):
    """An adoption time is outside {1..J} and is not 'inf'."""


class InvalidWeight(DataError):
    """A per-record weight is negative."""


class ZeroTotalWeight(DataError):
    """All weights in some period sum to zero."""

    def __init__(self, period: int):
        super().__init__(f"total weight in period {period} is zero", period=period)


# ---------------------------------------------------------------------------
# Randomization design
# ---------------------------------------------------------------------------

class DesignError(SrcreError):
    """Invalid randomization design or assignment."""


class EnumerationTooLarge(DesignError):
    """The assignment support exceeds the enumeration cap."""


class ShapeMismatch(SrcreError):
    """Array shapes are inconsistent with the declared design."""


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

class FitError(SrcreError):
    """A regression fit could not be computed."""


class EmptyArm(FitError):
    """No clusters were assigned to a required adoption time."""


class InsufficientClusters(FitError):
    """Too few clusters in an arm for the requested fit or variance."""


class SingularNormalEquations(FitError):
    """The weighted Gram matrix of a regression cell is ill conditioned."""

    def __init__(self, message: str, period=None, arm=None):
        super().__init__(message, period=period, arm=arm)


class RankDeficientCovariates(FitError):
    """The covariate block of a regression is rank deficient."""


class InvalidEstimatorSpec(SrcreError):
    """An estimator specification violates the level/adjustment rules."""


# ---------------------------------------------------------------------------
# Variance estimation
# ---------------------------------------------------------------------------

class VarianceError(SrcreError):
    """A sandwich covariance could not be computed."""


class SingularBread(VarianceError):
    """The bread matrix of the sandwich is ill conditioned."""


class DimensionMismatch(VarianceError):
    """A contrast-weight vector has the wrong length."""


# ---------------------------------------------------------------------------
# Estimands
# ---------------------------------------------------------------------------

class EstimandError(SrcreError):
    """Invalid estimand or summary specification."""


class InvalidPair(EstimandError):
    """An (a, a') pair violates the ordering constraints."""


class EmptySupport(EstimandError):
    """A summary estimand has no supporting (j, a, a') terms."""


class MissingPair(EstimandError):
    """A summary term references a pair or period outside the fit."""


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------

class SingularOracleFit(SrcreError):
    """A full-table oracle regression is singular."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class ConfigError(SrcreError):
    """A run configuration file is invalid."""
