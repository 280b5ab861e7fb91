"""Exception types shared across the toolkit."""


class VobsimError(Exception):
    """Base class for all toolkit errors."""


class DomainError(VobsimError, ValueError):
    """An argument is outside the physical domain of the model."""


class DegenerateStackError(VobsimError, ValueError):
    """A stack cannot be processed (e.g. constant data where a range is needed)."""


class StackFormatError(VobsimError, ValueError):
    """Base class for stack file I/O failures."""


class MalformedHeaderError(StackFormatError):
    """Bad magic bytes or invalid header fields."""


class DimensionMismatchError(StackFormatError):
    """Header dimensions are inconsistent with each other or with the caller."""


class TruncatedPayloadError(StackFormatError):
    """Payload is shorter (or longer) than the header promises."""


class SingularCovarianceError(VobsimError, ValueError):
    """Covariance stayed singular despite ridge regularization."""


class SaturationError(VobsimError, ValueError):
    """A figure of merit saturated (AUC of exactly 0 or 1 has infinite d')."""


class ConfigError(VobsimError, ValueError):
    """A run configuration failed validation; the message names the field."""
