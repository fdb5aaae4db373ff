"""Exception taxonomy shared across the toolkit.

Callers can catch :class:`MslError` to handle every library failure, or one
of the subclasses to distinguish caller bugs from data and numeric problems.
"""


class MslError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(MslError, ValueError):
    """A caller passed an argument that violates a documented precondition."""


class NumericalError(MslError, ArithmeticError):
    """A numeric routine failed to converge or met a degenerate matrix."""


class FormatError(MslError, ValueError):
    """A byte stream does not match the expected on-disk layout."""


class IngestionError(MslError, ValueError):
    """A manifest or feature collection is inconsistent or incomplete."""
