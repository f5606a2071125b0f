"""Exception types shared across the package."""


class InvexError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(InvexError, ValueError):
    """A parameter is outside its admissible range."""


class InputError(InvexError, ValueError):
    """Input data is malformed (non-finite values, wrong shape, empty)."""


class ConfigurationError(ParameterError):
    """A solver or experiment configuration violates its constraints."""


class DivergenceError(InvexError, RuntimeError):
    """A solver produced a non-finite or increasing objective.

    The partial trace is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
