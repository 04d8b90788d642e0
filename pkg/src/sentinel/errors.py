"""Exception hierarchy. Each class maps to a CLI exit code."""


class SentinelError(Exception):
    exit_code = 1


class ConfigError(SentinelError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 2


class DataError(SentinelError, ValueError):
    """Malformed, missing or inconsistent input data."""

    exit_code = 3


class NumericalError(SentinelError, ArithmeticError):
    """A numerical routine failed to converge or produced unusable output."""

    exit_code = 4

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
