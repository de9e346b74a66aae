"""Uniform midpoint grids and functions with a declared power singularity.

A :class:`GridFunction` stores a function ``f`` on ``(0, x_max]`` in the form

.. math:: f(x) = x^{s}\\, r(x),

where ``s > -1`` is a declared origin exponent and ``r`` is a regular factor
sampled at the cell midpoints ``x_j = (j + 1/2) h``.  Storing the regular
factor instead of the raw samples is what lets the product integration rules
in :mod:`qscale.calculus` stay accurate at integrable singularities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch

__all__ = ["Grid", "GridFunction", "EXPONENT_DIGITS"]

# Exponents are rounded before being used as cache keys or compared, so that
# sums such as 0.25 + 0.75 + 1 - 2 collapse onto the same value.
EXPONENT_DIGITS = 12


def _clean_exponent(s: float) -> float:
    s = round(float(s), EXPONENT_DIGITS)
    return 0.0 if s == 0 else s


@dataclass(frozen=True)
class Grid:
    """Uniform cell grid ``[0, N h]`` sampled at midpoints.

    Parameters
    ----------
    step : float
        Cell width ``h > 0``.
    count : int
        Number of cells ``N >= 2``.
    """

    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"grid step must be positive and finite, got {self.step}")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError(f"grid needs at least two cells, got {self.count}")
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def from_xmax(cls, x_max: float, step: float) -> "Grid":
        """Smallest grid of width ``step`` covering ``[0, x_max]``."""
        count = max(2, int(math.ceil(x_max / step - 1e-9)))
        return cls(step, count)

    @property
    def x_max(self) -> float:
        return self.step * self.count

    @property
    def nodes(self) -> np.ndarray:
        """Cell midpoints ``(j + 1/2) h``."""
        return (np.arange(self.count) + 0.5) * self.step

    @property
    def edges(self) -> np.ndarray:
        """Cell boundaries ``j h`` for ``j = 0..N``."""
        return np.arange(self.count + 1) * self.step

    def refine(self, factor: int) -> "Grid":
        """Grid with ``factor`` times smaller cells on the same interval.

        For odd ``factor`` every coarse midpoint is also a fine midpoint
        (fine index ``factor * j + factor // 2``).
        """
        return Grid(self.step / factor, self.count * factor)

    def truncate(self, count: int) -> "Grid":
        return Grid(self.step, count)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A function ``x**exponent * r(x)`` tabulated on a :class:`Grid`.

    Parameters
    ----------
    grid : Grid
        The sampling grid.
    values : ndarray
        Regular factor ``r`` at the grid midpoints.
    exponent : float
        Declared origin exponent ``s > -1``.

    Notes
    -----
    Instances are immutable; the ``values`` array is marked read-only.
    Arithmetic between grid functions requires identical grids and returns a
    function whose exponent is the smaller of the two.
    """

    grid: Grid
    values: np.ndarray
    exponent: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if vals.shape[0] != self.grid.count:
            raise ValueError(
                f"expected {self.grid.count} values, got {vals.shape[0]}"
            )
        s = _clean_exponent(self.exponent)
        if not s > -1:
            raise ValueError(f"origin exponent must exceed -1, got {s}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "exponent", s)

    # ------------------------------------------------------------------ build
    @classmethod
    def from_function(cls, grid: Grid, fn, exponent: float = 0.0) -> "GridFunction":
        """Tabulate ``fn`` (full function values) and divide out ``x**exponent``."""
        x = grid.nodes
        vals = np.asarray(fn(x), dtype=float) * np.ones_like(x)
        s = _clean_exponent(exponent)
        if s != 0:
            vals = vals / x**s
        return cls(grid, vals, s)

    @classmethod
    def from_regular(cls, grid: Grid, fn, exponent: float = 0.0) -> "GridFunction":
        """Tabulate the regular factor ``fn`` directly."""
        x = grid.nodes
        return cls(grid, np.asarray(fn(x), dtype=float) * np.ones_like(x), exponent)

    @classmethod
    def constant(cls, grid: Grid, value: float = 1.0) -> "GridFunction":
        return cls(grid, np.full(grid.count, float(value)), 0.0)

    @classmethod
    def power(cls, grid: Grid, exponent: float, coefficient: float = 1.0) -> "GridFunction":
        """The monomial ``coefficient * x**exponent`` held exactly."""
        return cls(grid, np.full(grid.count, float(coefficient)), exponent)

    @classmethod
    def identity(cls, grid: Grid) -> "GridFunction":
        return cls.power(grid, 1.0)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.count), 0.0)

    # ---------------------------------------------------------------- access
    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def samples(self) -> np.ndarray:
        """Full function values ``x_j**s * r_j``."""
        if self.exponent == 0:
            return self.values
        return self.grid.nodes**self.exponent * self.values

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def rebase(self, exponent: float) -> "GridFunction":
        """Same samples, regular factor taken relative to another exponent."""
        s = _clean_exponent(exponent)
        if s == self.exponent:
            return self
        return GridFunction(self.grid, self.values * self.grid.nodes ** (self.exponent - s), s)

    def regular_at(self, x) -> np.ndarray:
        """Piecewise linear interpolation of the regular factor.

        Outside the midpoint range the two nearest nodes are extrapolated
        linearly, which gives a second order estimate of ``r(0)``.
        """
        x = np.asarray(x, dtype=float)
        nodes = self.grid.nodes
        r = self.values
        if r.size == 1:
            return np.full_like(x, r[0])
        out = np.interp(x, nodes, r)
        lo = x < nodes[0]
        if np.any(lo):
            slope = (r[1] - r[0]) / self.grid.step
            out = np.where(lo, r[0] + slope * (x - nodes[0]), out)
        hi = x > nodes[-1]
        if np.any(hi):
            slope = (r[-1] - r[-2]) / self.grid.step
            out = np.where(hi, r[-1] + slope * (x - nodes[-1]), out)
        return out

    def __call__(self, x) -> np.ndarray:
        """Evaluate at arbitrary points; zero for ``x < 0``.

        At ``x = 0`` the value is ``r(0)`` when the exponent is zero, ``0``
        when it is positive and ``inf`` when it is negative.
        """
        x = np.asarray(x, dtype=float)
        r = self.regular_at(np.maximum(x, 0.0))
        s = self.exponent
        with np.errstate(divide="ignore", invalid="ignore"):
            if s == 0:
                out = r
            else:
                xp = np.where(x > 0, np.maximum(x, 0.0) ** s, 0.0 if s > 0 else np.inf)
                out = np.where(x > 0, xp * r, 0.0 if s > 0 else np.inf * np.sign(r))
        return np.where(x < 0, 0.0, out)

    def value_at_zero(self) -> float:
        """Limit ``f(0+)`` implied by the declared exponent."""
        return float(self(0.0))

    # ------------------------------------------------------------ arithmetic
    def _check(self, other: "GridFunction"):
        if not isinstance(other, GridFunction):
            return NotImplemented
        if other.grid != self.grid:
            raise GridMismatch(f"grids differ: {self.grid} vs {other.grid}")
        return None

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return self + GridFunction.constant(self.grid, other)
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        s = min(self.exponent, other.exponent)
        return GridFunction(self.grid, self.rebase(s).values + other.rebase(s).values, s)

    __radd__ = __add__

    def __neg__(self):
        return GridFunction(self.grid, -self.values, self.exponent)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(
                self.grid, self.values * other.values, self.exponent + other.exponent
            )
        if isinstance(other, np.ndarray):
            # pointwise multiplication by full samples of a regular function
            return GridFunction(self.grid, self.values * other, self.exponent)
        return GridFunction(self.grid, self.values * float(other), self.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return GridFunction(self.grid, self.values / float(other), self.exponent)

    def __repr__(self) -> str:
        return (
            f"GridFunction(h={self.grid.step:g}, N={self.grid.count}, "
            f"exponent={self.exponent:g})"
        )
