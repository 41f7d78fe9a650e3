"""Exception types raised across the package.

Plain ``ValueError`` is used for ordinary invalid arguments; the classes here
mark conditions a caller may reasonably want to catch and handle separately.
"""


class SpectroscopyError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SpectroscopyError, ValueError):
    """A quantity was requested outside the domain where it is defined."""


class AliasingError(SpectroscopyError, ValueError):
    """The sample interval cannot resolve the model bandwidth."""


class QuadratureError(SpectroscopyError, RuntimeError):
    """The decay integral did not converge to the requested tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InsufficientDataError(SpectroscopyError, ValueError):
    """Too few admissible points for a fit."""


class TailModelRejectedError(SpectroscopyError, ValueError):
    """The rate tail is not consistent with a power law."""


class GridMismatchError(SpectroscopyError, ValueError):
    """Frequency grids of two inputs do not line up."""


class SchemaError(SpectroscopyError, ValueError):
    """A persisted file does not conform to its schema."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:" if line is None else f"{path}:{line}: "
        super().__init__(f"{loc}{message}" if loc else message)
        self.path = path
        self.line = line
