"""Exception and warning types shared across the package.

Every error raised by occufit derives from :class:`OccufitError`, so
callers can catch one type at a process boundary (the CLI does exactly
that). Conditions that are suspicious but do not invalidate a fit are
reported through warning classes instead and mirrored as flags on the
returned result objects.
"""

from __future__ import annotations

__all__ = [
    "OccufitError",
    "DimensionMismatch",
    "LengthMismatch",
    "EmptyInput",
    "EmptyFile",
    "MissingColumn",
    "NonBinaryDetection",
    "RaggedSurveyGroup",
    "InvalidConfig",
    "InsufficientReplicates",
    "NoDetectedSites",
    "RankDeficientDesign",
    "NotPositiveDefinite",
    "NonFiniteEvaluation",
    "NonConvergence",
    "BoundaryEstimate",
    "SeparationSuspected",
    "ConvergenceWarning",
]


class OccufitError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(OccufitError, ValueError):
    """Array arguments have incompatible shapes."""


class LengthMismatch(OccufitError, ValueError):
    """Paired sequences differ in length."""


class EmptyInput(OccufitError, ValueError):
    """An operation that needs data received an empty array."""


class EmptyFile(OccufitError, ValueError):
    """An input file contains no rows."""


class MissingColumn(OccufitError, KeyError):
    """A required column is absent from a data file."""


class NonBinaryDetection(OccufitError, ValueError):
    """A detection entry is something other than 0 or 1."""


class RaggedSurveyGroup(OccufitError, ValueError):
    """A survey-level covariate group does not have one column per visit."""


class InvalidConfig(OccufitError, ValueError):
    """A configuration value is out of its allowed range."""


class InsufficientReplicates(OccufitError, ValueError):
    """Too few usable replicates to summarise a study."""


class NoDetectedSites(OccufitError, ValueError):
    """No site has a detection, so conditional fitting is impossible."""


class RankDeficientDesign(OccufitError, ValueError):
    """A design matrix does not have full column rank."""


class NotPositiveDefinite(OccufitError, ValueError):
    """A matrix required to be positive definite is not."""


class NonFiniteEvaluation(OccufitError, FloatingPointError):
    """A function evaluation produced NaN or infinity."""


class NonConvergence(OccufitError, RuntimeError):
    """An iterative fit failed to converge and no fallback succeeded."""


class BoundaryEstimate(OccufitError, RuntimeError):
    """An estimate sits on the boundary of the parameter space."""


class SeparationSuspected(UserWarning):
    """Coefficients have drifted far enough to suggest separation."""


class ConvergenceWarning(UserWarning):
    """An iterative fit stopped before meeting its tolerance."""
