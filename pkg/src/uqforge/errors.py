"""Exception types raised across the package."""


class UQError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(UQError, ValueError):
    """Dimension mismatch or an argument outside its allowed range."""


class EmptyDomainError(UQError, ValueError):
    """Intersection of two boxes has no interior."""


class DecompositionError(UQError, ValueError):
    """A covariance matrix is not symmetric positive-definite."""


class InsufficientDataError(UQError, ValueError):
    """Too few samples for the requested statistic."""


class DegenerateColumnError(UQError, ValueError):
    """A component has zero variance where a spread is required."""


class InvalidStartError(UQError, ValueError):
    """Sampler started from a point outside the target's support."""


class DegenerateLevelError(UQError, RuntimeError):
    """Every plausibility weight at a multilevel stage is zero."""


class QoiEvaluationError(UQError, RuntimeError):
    """A quantity-of-interest map returned a non-finite value."""

    def __init__(self, index, value):
        super().__init__(f"non-finite QoI value {value!r} at sample index {index}")
        self.index = index
        self.value = value


class OptionParseError(UQError, ValueError):
    """Malformed line or badly typed value in an options file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedOptionError(UQError, NotImplementedError):
    """An option that parses but cannot be honoured at run time."""
