"""Exception types raised by the engine, calibration and parsers."""


class EmbeddingError(Exception):
    """Base class for all library errors."""


class ParseError(EmbeddingError, ValueError):
    """A JSON document does not describe a valid object."""


class ConvexOrderViolated(EmbeddingError):
    """The starting law is not dominated by the target in convex order."""


class NonTerminating(EmbeddingError):
    """Positive mass reaches a state from which the barrier is never hit.

    Also raised when the only way out is an unbounded corridor, in which
    case the stopping time would have infinite expectation.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class MassLeak(EmbeddingError):
    """Stopped masses do not add up to one."""


class NoProgress(EmbeddingError):
    """Calibration stalled above the requested tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PathBudgetExceeded(EmbeddingError):
    """A simulated path ran past the step cap."""
