"""Exception taxonomy shared by every module.

The CLI maps these onto exit codes (validation 2, convergence 3,
numeric/accuracy 4), so solver code should raise the most specific
class that applies instead of bare ValueError/RuntimeError.
"""


class SubdiffError(Exception):
    """Base class for all package errors."""


class ValidationError(SubdiffError, ValueError):
    """Invalid parameters, shapes, or configuration.

    May carry a list of individual messages (``messages``) so config
    parsing can report every violation at once.
    """

    def __init__(self, message, messages=None):
        super().__init__(message)
        self.messages = list(messages) if messages is not None else [message]


class ConvergenceError(SubdiffError, RuntimeError):
    """An iteration failed to reach its tolerance.

    ``report`` (when present) is the diagnostic object of the failed
    iteration and ``result`` the last iterate, so callers can inspect
    the residual history.
    """

    def __init__(self, message, report=None, result=None):
        super().__init__(message)
        self.report = report
        self.result = result


class AccuracyError(SubdiffError, ArithmeticError):
    """A numerical routine cannot certify the requested accuracy."""


class StabilityError(AccuracyError):
    """A time-stepping system is indefinite; a finer time grid is needed."""
