"""Exception hierarchy shared across the package."""


class EBayesError(Exception):
    """Base class for all package errors."""


class ConfigError(EBayesError, ValueError):
    """Invalid settings or arguments (bad grid, bad rank, bad flag)."""


class DataError(EBayesError, ValueError):
    """Input data that cannot be used: unparseable files, empty samples, unsupported bins."""


class NumericalError(EBayesError, ArithmeticError):
    """A numerical procedure failed: singular matrices, vanishing denominators."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped without meeting its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    diagnostics : dict, optional
        Solver state at termination (iterations, gradient norm, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
