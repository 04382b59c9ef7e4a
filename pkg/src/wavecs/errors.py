"""Exception types shared across the package."""


class WavecsError(Exception):
    """Base class for all wavecs errors."""


class InvalidInputError(WavecsError, ValueError):
    """An argument violates an operation's precondition."""


class InvalidStateError(WavecsError, RuntimeError):
    """An object is missing data required by the requested operation."""


class InvalidConfigError(WavecsError, ValueError):
    """A run configuration value is out of range or inconsistent."""


class PlanConstructionError(WavecsError, RuntimeError):
    """A frequency-tiling plan failed its internal consistency checks."""


class NumericalFailureError(WavecsError, ArithmeticError):
    """Non-finite values appeared during an iterative computation."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration
