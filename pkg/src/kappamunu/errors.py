"""Exception hierarchy shared by all engine modules."""


class KmnError(Exception):
    """Base class for every error raised by the engine."""


class UsageError(KmnError, ValueError):
    """An operation was called outside its documented preconditions."""


class DomainError(KmnError, ValueError):
    """A point (or a finite-difference stencil) left the chart domain."""


class NumericError(KmnError, ArithmeticError):
    """A field or derived quantity evaluated to a non-finite value."""

    def __init__(self, operation, detail=""):
        self.operation = operation
        msg = f"non-finite value in {operation}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DegenerateFrameError(KmnError, ValueError):
    """Frame vectors are (numerically) linearly dependent."""


class StructureError(KmnError, ValueError):
    """The metric or the almost contact structure is malformed."""


class ClassificationError(KmnError):
    """The fitted structure parameter is not constant across sample points."""

    def __init__(self, message, spread=float("nan")):
        self.spread = spread
        super().__init__(message)


class ModelInconsistencyError(KmnError):
    """The structure violates relations implied by its claimed class."""


class ExtractionError(KmnError):
    """The (kappa, mu, nu) least-squares design is rank deficient."""


class NotKmnSpaceError(KmnError):
    """The spectrum of h (or phi h) does not have the required clustering."""


class InconsistencyError(KmnError):
    """Two independent routes to the same quantity disagree."""


class ParameterError(KmnError, ValueError):
    """A catalog or deformation parameter is out of range."""
