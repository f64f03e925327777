"""Exception hierarchy shared by all geomlab modules."""


class GeomlabError(Exception):
    """Base class for every error raised by geomlab."""


class InvalidArgument(GeomlabError, ValueError):
    """An argument is outside the documented domain of an operation."""


class ParseError(GeomlabError):
    """A mesh or config file could not be parsed.

    Parameters
    ----------
    message : str
        What went wrong.
    line : int, optional
        1-based line number of the offending line.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(GeomlabError):
    """A mesh violates the closed, oriented 2-manifold invariants."""


class EstimationError(GeomlabError):
    """Curvature estimation failed (e.g. rank-deficient quadric fit)."""

    def __init__(self, message, vertex=None):
        self.vertex = vertex
        super().__init__(message)


class SolverError(GeomlabError):
    """The eigensolver did not converge."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class DegenerateSpectrumError(GeomlabError):
    """The discrete kernel is not one-dimensional (disconnected input)."""


class NotApplicable(GeomlabError):
    """A check cannot be evaluated because its hypotheses fail."""


class HypothesisError(GeomlabError):
    """A hypothesis of a theorem (positivity, ellipticity) fails on the input."""


class ScanError(GeomlabError):
    """A family scan produced too few usable rows for an exponent fit."""


class StepError(GeomlabError):
    """A finite-difference displacement degenerated the mesh."""
