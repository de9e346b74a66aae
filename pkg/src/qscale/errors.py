"""Exception hierarchy.

Every failure mode of the library has its own class so that callers (and the
command line front end) can react to it specifically.  All of them derive from
:class:`QScaleError`.
"""

from __future__ import annotations

__all__ = [
    "QScaleError",
    "GridMismatch",
    "NonConvergentIntegral",
    "RootNotBracketed",
    "SubordinatorExcluded",
    "RegimeMismatch",
    "InfiniteMeasure",
    "KernelMismatch",
    "MassNotOne",
    "SingularSystem",
    "NotPositive",
    "NoResolvent",
    "DomainTooShort",
    "NetProfitViolated",
    "NotConverged",
]


class QScaleError(Exception):
    """Base class for all library errors."""


class GridMismatch(QScaleError, ValueError):
    """Two grid functions live on different grids."""


class NonConvergentIntegral(QScaleError, ValueError):
    """A requested integral of the Levy measure diverges."""


class RootNotBracketed(QScaleError, RuntimeError):
    """The right inverse of the Laplace exponent could not be bracketed."""


class SubordinatorExcluded(QScaleError, ValueError):
    """The model has monotone (non-increasing) paths, so no scale function exists."""


class RegimeMismatch(QScaleError, ValueError):
    """A method was called on a model outside its regime."""


class InfiniteMeasure(QScaleError, ValueError):
    """A method that needs a finite Levy measure received an infinite one."""


class KernelMismatch(QScaleError, ValueError):
    """A user supplied kernel ``h`` does not satisfy ``h * nu_bar_bar (0+) = 1``."""


class MassNotOne(QScaleError, ValueError):
    """A probability law does not have total mass one."""


class SingularSystem(QScaleError, ArithmeticError):
    """The discretised Volterra system has a vanishing diagonal."""


class NotPositive(QScaleError, ArithmeticError):
    """A resolvent that must be positive took a non-positive value."""


class NoResolvent(QScaleError, ValueError):
    """The integrated tail is not log-convex, so a positive resolvent is not guaranteed."""


class DomainTooShort(QScaleError, ValueError):
    """The tabulation domain is too short for the requested Laplace check."""


class NetProfitViolated(QScaleError, ValueError):
    """The ruin probability is requested for a model with non-positive drift."""


class NotConverged(QScaleError, RuntimeError):
    """A convolution series did not meet its stopping rule.

    Parameters
    ----------
    message : str
        Human readable description.
    result : object, optional
        The partial sum computed so far.
    report : object, optional
        The :class:`~qscale.series.SeriesReport` of the partial sum.
    """

    def __init__(self, message: str, result=None, report=None):
        super().__init__(message)
        self.result = result
        self.report = report
