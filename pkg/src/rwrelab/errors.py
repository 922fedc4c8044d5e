"""Exception hierarchy shared by all rwrelab modules."""


class RwreError(Exception):
    """Base class for all package errors."""


class InvalidVertexError(RwreError):
    """A vertex label is malformed for the space it was used with."""


class ConfigurationError(RwreError):
    """Inconsistent configuration: disabled mark stream, kernel/space mismatch, bad field values."""


class ConvergenceError(RwreError):
    """A truncated series did not converge within its iteration budget.

    Carries the partial sum and the number of terms accumulated so far.
    """

    def __init__(self, message, partial=None, terms=None):
        super().__init__(message)
        self.partial = partial
        self.terms = terms


class ResourceLimitError(RwreError):
    """An exact enumeration would exceed the configured resource bound."""


class DegenerateWeightsError(RwreError):
    """All importance weights are zero; no estimate can be formed."""


class TrajectoryError(RwreError):
    """A trajectory is too short for the requested shift index and horizon,
    or is not a valid walk on the space."""
