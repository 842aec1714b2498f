"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class MudAllocError(Exception):
    exit_code = 1


class ConfigError(MudAllocError, ValueError):
    """Invalid configuration or input dimensions."""

    exit_code = 2


class InfeasibleError(MudAllocError):
    """The (q_s, q_l) constraint pair admits no matching."""

    exit_code = 3


class NumericalError(MudAllocError, ArithmeticError):
    """Non-finite objective or gradient. ``iterate`` holds the offending point."""

    exit_code = 4

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate
