class SannError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SannError, ValueError):
    """Bad arguments, shapes or file contents."""


class NumericalError(SannError, ArithmeticError):
    """Training produced a non-finite value."""


class ExperimentError(SannError):
    """An experiment finished but one of its expectations did not hold."""
