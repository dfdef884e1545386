"""Exception hierarchy shared by all modules."""


class ThermoviscoError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(ThermoviscoError, ValueError):
    """Invalid discretization or scenario parameters."""


class DomainError(ThermoviscoError, ValueError):
    """A point lies outside the computational domain."""


class InputError(ThermoviscoError, ValueError):
    """A field or argument violates an operation's precondition."""


class UnsupportedError(ThermoviscoError, NotImplementedError):
    """The requested combination of options is not implemented."""


class NumericError(ThermoviscoError, ArithmeticError):
    """A numerical procedure failed (eigen-solver, non-finite values, ...)."""

    def __init__(self, message, *, partial=None, residual=None):
        super().__init__(message)
        self.partial = partial
        self.residual = residual
