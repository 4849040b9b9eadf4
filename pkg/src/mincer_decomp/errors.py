"""Exception hierarchy.

Data and usage problems derive from ``ValueError``; solver and numerical
breakdowns derive from ``ArithmeticError`` so the CLI can map them to
distinct exit codes.
"""


class DataError(ValueError):
    """Input data cannot be used (missing file, column, rows)."""


class RankDeficientError(DataError):
    """The design matrix does not have full column rank."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to produce a usable answer."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration budget."""

    def __init__(self, message, gap=None, tau=None):
        super().__init__(message)
        self.gap = gap
        self.tau = tau
