"""Exception types shared across the package."""


class CeraError(Exception):
    """Base class for all errors raised by this package."""


class IngestionError(CeraError):
    """A corpus input file could not be read."""


class ValidationError(CeraError):
    """An input violates a documented contract (bad label, duplicate id, ...)."""


class PreconditionError(CeraError):
    """An operation was called in a state its contract forbids."""


class SingularMatrixError(CeraError):
    """A matrix required to be invertible is singular.

    ``pivot_index`` is the zero-based elimination step at which the pivot
    fell below the singularity threshold.
    """

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class ConditioningError(CeraError):
    """A matrix fails a definiteness or conditioning requirement."""


class DegenerateVarianceError(CeraError):
    """Within-group variance is zero, so the F ratio is undefined."""


class ParameterBoundsError(CeraError):
    """A model parameter is outside its admissible range."""


class IdentificationError(ValidationError):
    """A latent-variable model has no scale constraint for some factor."""
