"""Exception hierarchy.

Numerical errors map to CLI exit code 4, data errors to exit code 3.
"""


class ClaCorrError(Exception):
    """Base class for every error raised by the package."""


class NumericalError(ClaCorrError):
    pass


class DataError(ClaCorrError):
    pass


class ZeroVariance(NumericalError):
    """A series (voxel, cluster average or regional average) is constant."""

    def __init__(self, message, ident=None):
        super().__init__(message)
        self.ident = ident


class NotPSD(NumericalError):
    """Assembled covariance is not positive semidefinite."""

    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class DomainError(NumericalError, ValueError):
    pass


class DegenerateClustering(NumericalError):
    pass


class ShapeError(DataError, ValueError):
    pass


class GeometryError(DataError, ValueError):
    pass


class ParseError(DataError):
    """Malformed input file; carries the offending row/column when known."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConsistencyError(DataError):
    pass


class ConfigError(ClaCorrError, ValueError):
    """Malformed run configuration (usage-level failure)."""
