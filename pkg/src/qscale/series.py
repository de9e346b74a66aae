"""Convolution power series ``kernel * sum_n w_n f^(*n)`` with a truncation rule.

The ``n = 0`` power is the unit mass at the origin and is never placed on the
grid: it contributes ``w_0 * kernel`` to the result (or is reported through
:attr:`SeriesReport.delta_mass` when there is no kernel).
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .calculus import convolve, l1_norm, sup_norm
from .errors import NotConverged
from .grid import GridFunction

__all__ = ["SeriesSpec", "SeriesReport", "convolution_series", "DECREASE_RUN"]

#: number of consecutive decreases of the term norm required before stopping
DECREASE_RUN = 3


@dataclass(frozen=True, eq=False)
class SeriesSpec:
    """Description of a convolution power series.

    Parameters
    ----------
    term : GridFunction
        The function ``f`` whose convolution powers are summed.
    base : float, optional
        Geometric weights ``w_n = 1 / base**(n + 1)``.
    weights : sequence or callable, optional
        Explicit weights ``w_n`` (used when ``base`` is not given).  With
        neither, all weights are one.
    kernel : GridFunction, optional
        Outer convolution factor; ``None`` stands for the unit mass at zero.
    tol : float, optional
        Threshold for the L1 norm of the weighted term.  Defaults to
        ``1e-10 * max(1, ||kernel||_1)``.
    max_terms : int
        Largest power computed.
    """

    term: GridFunction
    base: float | None = None
    weights: Sequence[float] | Callable[[int], float] | None = None
    kernel: GridFunction | None = None
    tol: float | None = None
    max_terms: int = 200

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.base is not None and self.base == 0:
            raise ValueError("base must be non-zero")

    def weight(self, n: int) -> float:
        if self.base is not None:
            return float(self.base) ** (-(n + 1))
        if self.weights is None:
            return 1.0
        if callable(self.weights):
            return float(self.weights(n))
        return float(self.weights[n]) if n < len(self.weights) else 0.0

    def tolerance(self) -> float:
        if self.tol is not None:
            return float(self.tol)
        scale = l1_norm(self.kernel) if self.kernel is not None else 1.0
        return 1e-10 * max(1.0, scale)


@dataclass
class SeriesReport:
    """Diagnostics of a truncated series.

    Attributes
    ----------
    terms_used : int
        Number of terms including ``n = 0``.
    last_term_l1 : float
        L1 norm of the last weighted power that was added.
    tail_bound : float
        Estimated uniform bound on the neglected remainder after the kernel.
    converged : bool
    term_norms : list of float
        L1 norms of the weighted powers ``n = 1, 2, ...``.
    exponents : list of float
        Declared origin exponents of those powers.
    delta_mass : float
        Weight of the unit mass at zero that is not part of the returned grid
        function (non-zero only without a kernel).
    """

    terms_used: int = 1
    last_term_l1: float = 0.0
    tail_bound: float = 0.0
    converged: bool = True
    term_norms: list = field(default_factory=list)
    exponents: list = field(default_factory=list)
    delta_mass: float = 0.0


def _tail_bound(norms, last: GridFunction | None, kernel: GridFunction | None, exact: bool):
    if exact or last is None:
        return 0.0
    if len(norms) < 2 or norms[-2] == 0:
        return math.inf
    ratio = norms[-1] / norms[-2]
    if not ratio < 1:
        return math.inf
    factor = ratio / (1 - ratio)
    if kernel is None:
        return sup_norm(last) * factor
    if kernel.exponent >= 0:
        return sup_norm(kernel) * norms[-1] * factor
    return l1_norm(kernel) * sup_norm(last) * factor


def convolution_series(spec: SeriesSpec, strict: bool = True):
    """Sum ``kernel * sum_{n >= 0} w_n f^(*n)``.

    Powers are accumulated iteratively.  The loop stops when the L1 norm of
    the weighted power is at most the tolerance and has decreased for
    ``DECREASE_RUN`` consecutive terms, or when a power vanishes identically
    (finite series).

    Parameters
    ----------
    spec : SeriesSpec
    strict : bool
        Raise :class:`~qscale.errors.NotConverged` when ``max_terms`` is
        reached; otherwise return the partial sum with ``converged=False``.

    Returns
    -------
    (GridFunction, SeriesReport)

    Examples
    --------
    >>> from qscale.grid import Grid, GridFunction
    >>> g = Grid.from_xmax(1.0, 1 / 256)
    >>> W, rep = convolution_series(SeriesSpec(GridFunction.constant(g, 1.0), base=1.0,
    ...                                        kernel=GridFunction.constant(g, 1.0)))
    >>> round(float(W(1.0)), 4)
    2.7183
    """
    f = spec.term
    grid = f.grid
    eps = spec.tolerance()
    w0 = spec.weight(0)
    power: GridFunction | None = None
    total: GridFunction | None = None
    last: GridFunction | None = None
    norms: list[float] = []
    exponents: list[float] = []
    converged = False
    exact = False
    n = 0
    if f.is_zero():
        converged = exact = True
    else:
        for n in range(1, spec.max_terms + 1):
            power = f if n == 1 else convolve(power, f)
            if power.exponent >= 1:
                power = power.rebase(0.0)
            if power.is_zero():
                n -= 1
                converged = exact = True
                break
            term = power * spec.weight(n)
            last = term
            t = l1_norm(term)
            norms.append(t)
            exponents.append(power.exponent)
            total = term if total is None else total + term
            decreasing = len(norms) > DECREASE_RUN and all(
                norms[-k] < norms[-k - 1] for k in range(1, DECREASE_RUN + 1)
            )
            if t == 0.0 or (t <= eps and decreasing):
                converged = True
                break
    report = SeriesReport(
        terms_used=n + 1,
        last_term_l1=norms[-1] if norms else 0.0,
        tail_bound=_tail_bound(norms, last, spec.kernel, exact),
        converged=converged,
        term_norms=norms,
        exponents=exponents,
    )
    if spec.kernel is None:
        result = total if total is not None else GridFunction.zeros(grid)
        report.delta_mass = w0
    else:
        result = spec.kernel * w0
        if total is not None:
            result = result + convolve(spec.kernel, total)
    if not converged and strict:
        raise NotConverged(
            f"series not converged after {spec.max_terms} terms "
            f"(last weighted term L1 = {report.last_term_l1:.3g} > {eps:.3g})",
            result=result,
            report=report,
        )
    return result, report


def power_by_squaring(f: GridFunction, n: int) -> GridFunction:
    """``f^(*n)`` by repeated squaring, used to cross-check the iterative build."""
    if n < 1:
        raise ValueError("n must be positive")
    result = None
    base = f
    while n:
        if n & 1:
            result = base if result is None else convolve(result, base)
        n >>= 1
        if n:
            base = convolve(base, base)
    return result

