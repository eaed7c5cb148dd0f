"""Exception types shared across the package."""


class QkdrateError(Exception):
    """Base class for all package-specific errors."""


class StructureError(QkdrateError):
    """Input lacks required structure (shape, factors, hermiticity)."""


class DimensionMismatchError(QkdrateError):
    """Operands have incompatible dimensions."""


class NegativityError(QkdrateError):
    """Matrix has an eigenvalue below the allowed negativity tolerance."""


class SupportError(QkdrateError):
    """Infinite divergence: support of the first state exceeds the second."""


class NotPSDError(QkdrateError):
    """Matrix expected to be positive semidefinite is not."""


class InvalidIsometryError(QkdrateError):
    """Provided isometry does not capture the support of the maps."""


class InvalidStatisticsError(QkdrateError):
    """Observed statistics are malformed (negative or inconsistent)."""


class DegenerateStatisticsError(QkdrateError):
    """A derived quantity (error rate, pass probability) has zero denominator."""


class PreconditionError(QkdrateError):
    """Input violates a documented precondition."""
