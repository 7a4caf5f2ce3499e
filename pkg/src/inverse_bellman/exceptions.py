"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DimensionError(ValidationError):
    """Array shapes do not agree."""


class NonConvergenceError(RuntimeError):
    """Value iteration hit its iteration cap before certifying the target accuracy."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SearchFailureError(RuntimeError):
    """Reward search exhausted its attempt budget.

    ``best`` holds the candidate whose gap came closest to the target.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class FormatError(ValueError):
    """A persisted document is missing fields or cannot be parsed."""


class CorruptionError(FormatError):
    """A persisted document failed its content hash check."""
