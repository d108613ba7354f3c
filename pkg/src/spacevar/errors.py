"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems exit with 2,
numeric non-convergence with 3, and I/O failures with 4.
"""


class SpaceVarError(Exception):
    """Base class for all package errors."""


class ValidationError(SpaceVarError, ValueError):
    """Inputs violate a documented precondition or invariant."""


class ShapeError(ValidationError):
    """Array dimensions are inconsistent."""


class StabilityError(ValidationError):
    """A process fails the spectral-radius stability requirement."""


class InsufficientDataError(ValidationError):
    """Too few observations for the requested operation."""


class PreprocessingRequiredError(ValidationError):
    """The panel still contains missing values."""


class DegeneratePredictorError(ValidationError):
    """A zero-variance predictor carries signal it cannot explain."""


class EmptyMaskError(ValidationError):
    """A predictor mask allows no coordinates."""


class EmptySampleError(ValidationError):
    """Node sampling repeatedly produced an empty subset."""


class EmptyEdgeSetError(SpaceVarError):
    """Signal raised when a radius is requested from an edge-free graph.

    Callers are expected to catch this and fall back to the maximal
    pairwise distance; it deliberately does not subclass ValidationError
    because an empty estimate is a legitimate runtime outcome.
    """


class ScenarioError(ValidationError):
    """A synthetic-scenario constraint cannot be satisfied."""


class UndefinedMetricError(ValidationError):
    """A score is undefined for the given truth (e.g. no true edges)."""


class DataError(ValidationError):
    """A series violates a preprocessing domain requirement."""


class ConvergenceError(SpaceVarError):
    """An iterative routine exhausted its iteration budget.

    Attributes
    ----------
    last_iterate : object
        The final state of the iteration (solution vector or matrix).
    residual : float
        The convergence measure at the point of failure.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
