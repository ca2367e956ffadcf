"""Exception hierarchy."""


class RelayCFError(Exception):
    """Base class for all package errors."""


class DomainError(RelayCFError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ConfigError(RelayCFError, ValueError):
    """Inconsistent or out-of-range configuration."""


class NumericalError(RelayCFError, ArithmeticError):
    """A numerical procedure failed to converge.

    ``partial`` carries the best available value when one exists.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
