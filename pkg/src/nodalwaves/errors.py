"""Exception hierarchy shared by every module.

``ConfigError`` and ``DomainError`` signal bad input (CLI exit code 2);
``RegimeError`` and its subclasses signal that a numerical computation left
the regime where its result can be trusted (CLI exit code 3).
"""


class NodalWavesError(Exception):
    """Base class for all package errors."""


class ConfigError(NodalWavesError, ValueError):
    """Invalid configuration or parameter combination."""


class DomainError(NodalWavesError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class RegimeError(NodalWavesError, ArithmeticError):
    """A numerical quantity is outside the range where results are reliable."""


class NotPSDError(RegimeError):
    """Matrix expected positive semidefinite has a significantly negative eigenvalue."""


class NearSingularError(RegimeError):
    """Conditioning matrix is numerically singular."""


class InsufficientDataError(RegimeError):
    """Too few samples or eigenvalues for a meaningful statistic."""
