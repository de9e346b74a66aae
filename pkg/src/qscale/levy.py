"""Spectrally negative Levy processes: jump measures, drift conventions, psi and Phi.

A model is described by a drift in one of three conventions, a Gaussian
coefficient ``sigma2`` (the coefficient of ``beta**2`` in psi) and a jump
measure ``nu`` on ``(0, inf)`` describing the sizes of the downward jumps.
The Laplace exponent is

.. math::

    \\psi(\\beta) = c\\beta + \\sigma^2\\beta^2
        + \\int (e^{-\\beta x} - 1 + \\beta x 1_{(0,1)}(x))\\, \\nu(dx),

and, depending on which moments of ``nu`` are finite, it can be rewritten in
terms of the tail ``nu_bar(x) = nu([x, inf))`` or the integrated tail
``nu_bar_bar(x) = int_x^inf nu_bar``.

Jump measure families
---------------------
:class:`Stable`, :class:`TemperedStable`, :class:`CompoundPoisson`,
:class:`TabulatedTail`, :class:`Custom`, plus :class:`NoJumps` and
:class:`CombinedJumps` (a sum of families, used for perturbed models).
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .calculus import cell_integrals, laplace_transform
from .distributions import ExponentialLaw, MixedDistribution
from .errors import NonConvergentIntegral, RootNotBracketed, SubordinatorExcluded
from .grid import Grid, GridFunction

__all__ = [
    "Regime",
    "DriftConvention",
    "DriftConstants",
    "JumpMeasure",
    "NoJumps",
    "Stable",
    "TemperedStable",
    "CompoundPoisson",
    "TabulatedTail",
    "Custom",
    "CombinedJumps",
    "LevyModel",
    "TruncatedMeasure",
    "psi",
    "phi",
    "tail",
    "integrated_tail",
    "classify",
    "drift_constants",
    "truncate_measure",
    "right_inverse",
]

QUAD_TOL = 1e-10
BETA_CAP = 1e12


class Regime(enum.Enum):
    GAUSSIAN = "gaussian"
    BOUNDED_VARIATION = "bounded-variation"
    UNBOUNDED_VARIATION = "unbounded-variation"


class DriftConvention(enum.Enum):
    """Which drift constant the model stores.

    ``C`` is the raw triplet drift, ``C_PRIME`` is ``c + int_(0,1) y nu(dy)``
    and ``C_DOUBLE_PRIME`` is ``c - int_[1,inf) y nu(dy)``, the mean of the
    process at time one.
    """

    C = "c"
    C_PRIME = "c_prime"
    C_DOUBLE_PRIME = "c_double_prime"


@dataclass(frozen=True)
class DriftConstants:
    c: float | None
    c_prime: float | None
    c_double_prime: float | None


def _quad(fn, a, b, points=None):
    kw = {"epsabs": QUAD_TOL, "epsrel": 1e-12, "limit": 400}
    if points and math.isfinite(b):
        pts = [p for p in points if a < p < b]
        if pts:
            kw["points"] = pts
    val, _ = integrate.quad(fn, a, b, **kw)
    return val


def _upper_gamma_neg(alpha: float, z):
    """``(Gamma(1 - alpha, z), Gamma(-alpha, z))`` for ``alpha in (1, 2)``, ``z > 0``.

    Obtained from ``Gamma(2 - alpha, z)`` by the downward recurrence
    ``Gamma(s, z) = (Gamma(s + 1, z) - z**s e**-z) / s``.
    """
    z = np.asarray(z, dtype=float)
    g2 = special.gammaincc(2 - alpha, z) * special.gamma(2 - alpha)
    g1 = (g2 - z ** (1 - alpha) * np.exp(-z)) / (1 - alpha)
    g0 = (g1 - z ** (-alpha) * np.exp(-z)) / (-alpha)
    return g1, g0


# =============================================================================
# jump measures
# =============================================================================
class JumpMeasure:
    """Base class with quadrature fallbacks built on :meth:`tail` alone.

    Subclasses override whatever they know in closed form.  All methods refer
    to the reflected measure ``nu`` on ``(0, inf)``.
    """

    family = "custom"
    #: origin exponent of nu_bar_bar used when tabulating it on a grid
    integrated_tail_exponent: float = 0.0
    #: origin exponent of nu_bar (only meaningful for bounded variation)
    tail_exponent: float = 0.0

    # --- required -----------------------------------------------------------
    def tail(self, x):
        raise NotImplementedError

    # --- moments ------------------------------------------------------------
    def breakpoints(self) -> list[float]:
        return []

    def _scalar_tail(self, y: float) -> float:
        return float(self.tail(np.asarray(y, dtype=float)))

    def small_moment(self) -> float:
        """``int_(0,1) y nu(dy)`` (``inf`` when divergent)."""
        t1 = self._scalar_tail(1.0)
        return _quad(lambda y: self._scalar_tail(y) - t1, 0.0, 1.0, self.breakpoints())

    def large_moment(self) -> float:
        """``int_[1,inf) y nu(dy)`` (``inf`` when divergent)."""
        return self._scalar_tail(1.0) + _quad(self._scalar_tail, 1.0, math.inf)

    def partial_moment(self, lo: float, hi: float) -> float:
        """``int_[lo,hi) y nu(dy)`` for ``0 < lo <= hi < inf``."""
        thi = self._scalar_tail(hi)
        body = _quad(lambda y: self._scalar_tail(y) - thi, lo, hi, self.breakpoints())
        return lo * (self._scalar_tail(lo) - thi) + body

    def total_mass(self) -> float:
        return math.inf if not math.isfinite(self.small_moment()) else self._scalar_tail(1e-300)

    def is_finite(self) -> bool:
        return math.isfinite(self.total_mass())

    # --- integrated tail ----------------------------------------------------
    def integrated_tail(self, x):
        if not math.isfinite(self.large_moment()):
            raise NonConvergentIntegral("int_[1,inf) y nu(dy) diverges")
        x = np.asarray(x, dtype=float)
        flat = np.array(
            [_quad(self._scalar_tail, xx, math.inf) for xx in np.atleast_1d(x).ravel()]
        )
        return flat.reshape(x.shape)

    # --- Laplace transforms -------------------------------------------------
    def laplace_tail(self, beta: float) -> float:
        """``L[nu_bar](beta)``; finite only with bounded variation."""
        if not math.isfinite(self.small_moment()):
            raise NonConvergentIntegral("nu_bar is not integrable at the origin")
        return _quad(lambda y: math.exp(-beta * y) * self._scalar_tail(y), 0.0, math.inf)

    def laplace_integrated_tail(self, beta: float) -> float:
        """``L[nu_bar_bar](beta) = int nu_bar(y) (1 - e^{-beta y}) / beta dy``."""
        if not math.isfinite(self.large_moment()):
            raise NonConvergentIntegral("int_[1,inf) y nu(dy) diverges")
        fn = lambda y: self._scalar_tail(y) * -math.expm1(-beta * y) / beta  # noqa: E731
        return _quad(fn, 0.0, 1.0, self.breakpoints()) + _quad(fn, 1.0, math.inf)

    def laplace_small_integrated_tail(self, beta: float, z: float) -> float:
        """``L`` of ``int_x^z (nu_bar(y) - nu_bar(z)) dy`` (zero beyond ``z``)."""
        tz = self._scalar_tail(z)
        fn = lambda y: (self._scalar_tail(y) - tz) * -math.expm1(-beta * y) / beta  # noqa: E731
        return _quad(fn, 0.0, z, self.breakpoints())

    def laplace_large_part(self, beta: float, z: float) -> float:
        """``int_[z,inf) (e^{-beta x} - 1) nu(dx)``."""
        tz = self._scalar_tail(z)
        body = _quad(lambda y: math.exp(-beta * y) * self._scalar_tail(y), z, math.inf)
        return math.expm1(-beta * z) * tz - beta * body

    # --- change of measure --------------------------------------------------
    def mean_shift(self, phi: float) -> float:
        """``int x (1 - e^{-phi x}) nu(dx)``, the drift change under tilting."""
        fn = lambda y: (  # noqa: E731
            -math.expm1(-phi * y) + phi * y * math.exp(-phi * y)
        ) * self._scalar_tail(y)
        return _quad(fn, 0.0, 1.0, self.breakpoints()) + _quad(fn, 1.0, math.inf)

    def tilted(self, phi: float) -> "JumpMeasure":
        base = self

        def tail_phi(x):
            x = np.asarray(x, dtype=float)
            flat = []
            for xx in np.atleast_1d(x).ravel():
                body = _quad(lambda y: math.exp(-phi * y) * base._scalar_tail(y), xx, math.inf)
                flat.append(math.exp(-phi * xx) * base._scalar_tail(xx) - phi * body)
            return np.array(flat).reshape(x.shape)

        return Custom(
            tail_phi,
            integrated_tail_exponent=self.integrated_tail_exponent,
            name=f"tilted({self.describe()},{phi!r})",
        )

    # --- grids --------------------------------------------------------------
    def power_kernel(self):
        """``(C, gamma)`` with ``nu_bar_bar(x) ~ C x**-gamma`` at the origin, or ``None``."""
        return None

    def integrated_tail_grid(self, grid: Grid) -> GridFunction:
        return GridFunction.from_function(
            grid, self.integrated_tail, self.integrated_tail_exponent
        )

    def tail_grid(self, grid: Grid) -> GridFunction:
        return GridFunction.from_function(grid, self.tail, self.tail_exponent)

    def small_integrated_tail_grid(self, grid: Grid, z: float) -> GridFunction:
        """``int_x^z (nu_bar(y) - nu_bar(z)) dy`` on the grid (zero for ``x >= z``)."""
        x = grid.nodes
        tz = self._scalar_tail(z)
        if math.isfinite(self.large_moment()):
            vals = self.integrated_tail(np.minimum(x, z)) - self.integrated_tail(z)
            vals = vals - np.maximum(z - x, 0.0) * tz
        else:
            pieces = np.zeros(x.size)
            inside = np.flatnonzero(x < z)
            pts = np.append(x[inside], z)
            seg = [
                _quad(self._scalar_tail, pts[j], pts[j + 1], self.breakpoints())
                for j in range(inside.size)
            ]
            pieces[inside] = np.cumsum(seg[::-1])[::-1]
            vals = pieces - np.maximum(z - x, 0.0) * tz
        vals = np.where(x < z, vals, 0.0)
        s = self.integrated_tail_exponent
        return GridFunction(grid, vals / x**s if s else vals, s)

    def large_part(self, grid: Grid, z: float) -> MixedDistribution:
        """``nu`` restricted to ``[z, inf)`` with cell masses spread as a density."""
        e = grid.edges
        lo = np.maximum(e[:-1], z)
        masses = np.where(e[1:] > z, self.tail(lo) - self.tail(e[1:]), 0.0)
        return MixedDistribution((), GridFunction(grid, masses / grid.step, 0.0))

    # --- misc ---------------------------------------------------------------
    def describe(self) -> str:
        return repr(self)

    def __add__(self, other: "JumpMeasure") -> "JumpMeasure":
        return CombinedJumps((self, other))


@dataclass(frozen=True)
class NoJumps(JumpMeasure):
    """The zero measure."""

    family = "none"

    def tail(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def integrated_tail(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def small_moment(self):
        return 0.0

    def large_moment(self):
        return 0.0

    def partial_moment(self, lo, hi):
        return 0.0

    def total_mass(self):
        return 0.0

    def laplace_tail(self, beta):
        return 0.0

    def laplace_integrated_tail(self, beta):
        return 0.0

    def laplace_small_integrated_tail(self, beta, z):
        return 0.0

    def laplace_large_part(self, beta, z):
        return 0.0

    def mean_shift(self, phi):
        return 0.0

    def tilted(self, phi):
        return self

    def large_part(self, grid, z):
        return MixedDistribution()

    def finite_measure(self, grid: Grid) -> MixedDistribution:
        return MixedDistribution()


@dataclass(frozen=True)
class TemperedStable(JumpMeasure):
    """``nu(dx) = scale * x**(-1-alpha) e**(-theta x) / Gamma(-alpha) dx``.

    The Laplace exponent with zero mean drift is
    ``scale * ((beta + theta)**alpha - theta**alpha - alpha theta**(alpha-1) beta)``.
    With ``theta = 0`` this is the stable measure with ``psi = scale * beta**alpha``.
    """

    alpha: float
    theta: float = 0.0
    scale: float = 1.0
    family = "tempered_stable"

    def __post_init__(self):
        if not 1 < self.alpha < 2:
            raise ValueError("alpha must lie in (1, 2)")
        if self.theta < 0 or self.scale <= 0:
            raise ValueError("theta must be >= 0 and scale > 0")

    @property
    def integrated_tail_exponent(self):  # type: ignore[override]
        return 1.0 - self.alpha

    @property
    def _k(self):
        return self.scale / special.gamma(-self.alpha)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        a, t = self.alpha, self.theta
        if t == 0:
            return self._k * x ** (-a) / a
        _, g0 = _upper_gamma_neg(a, t * x)
        return self._k * t**a * g0

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        a, t = self.alpha, self.theta
        if t == 0:
            return self.scale * x ** (1 - a) / special.gamma(2 - a)
        g1, g0 = _upper_gamma_neg(a, t * x)
        return self._k * (t ** (a - 1) * g1 - x * t**a * g0)

    def small_moment(self):
        return math.inf

    def large_moment(self):
        a, t = self.alpha, self.theta
        if t == 0:
            return self._k / (a - 1)
        g1, _ = _upper_gamma_neg(a, t)
        return float(self._k * t ** (a - 1) * g1)

    def partial_moment(self, lo, hi):
        a, t = self.alpha, self.theta
        if t == 0:
            return float(self._k * (hi ** (1 - a) - lo ** (1 - a)) / (1 - a))
        g_lo, _ = _upper_gamma_neg(a, t * lo)
        g_hi, _ = _upper_gamma_neg(a, t * hi)
        return float(self._k * t ** (a - 1) * (g_lo - g_hi))

    def total_mass(self):
        return math.inf

    def laplace_tail(self, beta):
        raise NonConvergentIntegral("nu_bar is not integrable at the origin")

    def laplace_integrated_tail(self, beta):
        a, t = self.alpha, self.theta
        if t == 0:
            return self.scale * beta ** (a - 2)
        if beta < 1e-3 * t:
            # binomial series avoids the cancellation in the closed form
            u = beta / t
            total, coef, k = 0.0, a * (a - 1) / 2, 2
            while True:
                term = coef * u ** (k - 2)
                total += term
                if abs(term) < 1e-17 * abs(total):
                    break
                coef *= (a - k) / (k + 1)
                k += 1
            return self.scale * t ** (a - 2) * total
        return self.scale * ((beta + t) ** a - t**a - a * t ** (a - 1) * beta) / beta**2

    def mean_shift(self, phi):
        a, t = self.alpha, self.theta
        return self.scale * a * ((phi + t) ** (a - 1) - t ** (a - 1))

    def tilted(self, phi):
        return TemperedStable(self.alpha, self.theta + phi, self.scale)

    def power_kernel(self):
        return (self.scale / special.gamma(2 - self.alpha), self.alpha - 1.0)


class Stable(TemperedStable):
    """Spectrally negative alpha-stable jumps with ``psi(beta) = scale * beta**alpha``.

    ``nu_bar_bar(x) = scale * x**(1 - alpha) / Gamma(2 - alpha)``.
    """

    family = "stable"

    def __init__(self, alpha: float, scale: float = 1.0):
        super().__init__(alpha, 0.0, scale)

    def __repr__(self):
        return f"Stable(alpha={self.alpha!r}, scale={self.scale!r})"


@dataclass(frozen=True)
class CompoundPoisson(JumpMeasure):
    """``nu = rate * law`` for a probability law of the jump sizes.

    ``law`` is a :class:`~qscale.distributions.MixedDistribution` or an
    :class:`~qscale.distributions.ExponentialLaw`.
    """

    rate: float
    law: object
    family = "compound_poisson"

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError("rate must be non-negative")

    def breakpoints(self):
        atoms = getattr(self.law, "atoms", ())
        return [a for a, _ in atoms]

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return self.rate * self.law.tail(x)

    def integrated_tail(self, x):
        return self.rate * self.law.integrated_tail(np.asarray(x, dtype=float))

    def small_moment(self):
        return self.rate * self.law.partial_mean(0.0, 1.0)

    def large_moment(self):
        return self.rate * self.law.partial_mean(1.0, math.inf)

    def partial_moment(self, lo, hi):
        return self.rate * self.law.partial_mean(lo, hi)

    def total_mass(self):
        return self.rate * self.law.total_mass()

    def laplace_tail(self, beta):
        return float(self.rate * self.law.laplace_tail(beta))

    def laplace_integrated_tail(self, beta):
        return float((self.rate * self.law.mean() - self.laplace_tail(beta)) / beta)

    def laplace_large_part(self, beta, z):
        law = self.law
        if isinstance(law, ExponentialLaw):
            t = law.rate
            return self.rate * (t * math.exp(-(t + beta) * z) / (t + beta) - math.exp(-t * z))
        if isinstance(law, MixedDistribution):
            part = law.restricted(z)
            return self.rate * float(part.laplace(beta) - part.total_mass())
        return super().laplace_large_part(beta, z)

    def mean_shift(self, phi):
        return self.rate * (self.law.mean() - self.law.mean_exp(phi))

    def tilted(self, phi):
        t = self.law.tilted(phi)
        if isinstance(t, MixedDistribution):
            mass = t.total_mass()
            return CompoundPoisson(self.rate * mass, t.scaled(1.0 / mass))
        return CompoundPoisson(self.rate * t.factor, t.law)

    def finite_measure(self, grid: Grid) -> MixedDistribution:
        """``nu`` as atoms plus a density on ``grid``."""
        return self.law.to_mixed(grid).scaled(self.rate)

    def large_part(self, grid, z):
        return self.finite_measure(grid).restricted(z)


@dataclass(frozen=True, eq=False)
class TabulatedTail(JumpMeasure):
    """A tail function ``nu_bar`` given on a grid; zero beyond ``x_max``.

    The declared exponent of the grid function must exceed ``-1``, so the
    measure always has bounded variation.
    """

    values: GridFunction
    family = "tabulated"

    @property
    def tail_exponent(self):  # type: ignore[override]
        return self.values.exponent

    @cached_property
    def _cum(self):
        v = self.values
        cells = cell_integrals(v.grid, v.exponent) * v.values
        return np.concatenate(([0.0], np.cumsum(cells)))

    def _integral_from(self, x):
        """``int_x^{x_max} nu_bar`` by exact cell integration plus a partial cell."""
        v = self.values
        x = np.clip(np.asarray(x, dtype=float), 0.0, v.grid.x_max)
        h = v.grid.step
        j = np.minimum((x / h).astype(int), v.grid.count - 1)
        s = v.exponent
        e = v.grid.edges
        partial = (e[j + 1] ** (s + 1) - x ** (s + 1)) / (s + 1) * v.values[j]
        return (self._cum[-1] - self._cum[j + 1]) + partial

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x <= self.values.grid.x_max)
        return np.where(inside, self.values(np.where(inside, x, 1.0)), 0.0)

    def integrated_tail(self, x):
        return self._integral_from(x)

    def small_moment(self):
        return float(self._cum[-1] - self._integral_from(1.0) - self._scalar_tail(1.0))

    def large_moment(self):
        return float(self._scalar_tail(1.0) + self._integral_from(1.0))

    def total_mass(self):
        return float(self.values.value_at_zero())

    def laplace_tail(self, beta):
        return float(laplace_transform(self.values, beta)[0])

    def laplace_integrated_tail(self, beta):
        return float((self._cum[-1] - self.laplace_tail(beta)) / beta)

    def integrated_tail_grid(self, grid):
        return GridFunction.from_function(grid, self.integrated_tail, 0.0)

    def tail_grid(self, grid):
        if grid == self.values.grid:
            return self.values
        return GridFunction.from_function(grid, self.tail, self.tail_exponent)

    def mean_shift(self, phi):
        v = self.values
        x = v.grid.nodes
        w = cell_integrals(v.grid, v.exponent) * v.values
        return float(np.sum(w * (-np.expm1(-phi * x) + phi * x * np.exp(-phi * x))))

    def tilted(self, phi):
        v = self.values
        x = v.grid.nodes
        w = cell_integrals(v.grid, v.exponent) * v.values * np.exp(-phi * x)
        after = np.cumsum(w[::-1])[::-1] - 0.5 * w
        tail_phi = np.exp(-phi * x) * v.samples - phi * after
        return TabulatedTail(GridFunction.from_function(v.grid, lambda _: tail_phi, v.exponent))

    def describe(self):
        digest = hashlib.sha256(self.values.values.tobytes()).hexdigest()[:16]
        return f"TabulatedTail(h={self.values.grid.step!r}, N={self.values.grid.count}, s={self.values.exponent!r}, sha={digest})"


@dataclass(frozen=True, eq=False)
class Custom(JumpMeasure):
    """A jump measure given by its tail function (vectorised callable).

    Parameters
    ----------
    tail_fn : callable
        ``nu_bar``.
    integrated_tail_fn : callable, optional
        ``nu_bar_bar`` in closed form; otherwise adaptive quadrature is used
        (absolute tolerance ``1e-10``).
    integrated_tail_exponent : float, optional
        Declared origin exponent of ``nu_bar_bar``.  Must be given for
        measures of unbounded variation; defaults to ``0`` otherwise.
    name : str
        Label used in fingerprints.
    """

    tail_fn: object
    integrated_tail_fn: object = None
    integrated_tail_exponent: float | None = None  # type: ignore[assignment]
    name: str = "custom"
    family = "custom"

    def __post_init__(self):
        if self.integrated_tail_exponent is None:
            if not math.isfinite(self.small_moment()):
                raise ValueError(
                    "unbounded variation: declare integrated_tail_exponent explicitly"
                )
            object.__setattr__(self, "integrated_tail_exponent", 0.0)

    def tail(self, x):
        return np.asarray(self.tail_fn(np.asarray(x, dtype=float)), dtype=float)

    def _log_slope(self, y1: float, y2: float) -> float:
        t1, t2 = self._scalar_tail(y1), self._scalar_tail(y2)
        if t1 <= 0 or t2 <= 0:
            return -math.inf
        return (math.log(t2) - math.log(t1)) / (math.log(y2) - math.log(y1))

    @cached_property
    def _small(self):
        # nu_bar ~ y**slope near 0: int_0^1 nu_bar < inf iff slope > -1
        if self._log_slope(1e-10, 1e-9) <= -1 + 1e-6:
            return math.inf
        return JumpMeasure.small_moment(self)

    @cached_property
    def _large(self):
        # int_1^inf nu_bar < inf iff nu_bar decays faster than 1/y
        if self._log_slope(1e8, 1e9) >= -1 - 1e-6:
            return math.inf
        return JumpMeasure.large_moment(self)

    def small_moment(self):
        return self._small

    def large_moment(self):
        return self._large

    def integrated_tail(self, x):
        if self.integrated_tail_fn is not None:
            return np.asarray(self.integrated_tail_fn(np.asarray(x, dtype=float)), dtype=float)
        return JumpMeasure.integrated_tail(self, x)

    def describe(self):
        return f"Custom({self.name})"


@dataclass(frozen=True, eq=False)
class CombinedJumps(JumpMeasure):
    """Sum of several jump measures."""

    parts: tuple
    family = "combined"

    def __post_init__(self):
        flat = []
        for p in self.parts:
            flat.extend(p.parts if isinstance(p, CombinedJumps) else [p])
        object.__setattr__(self, "parts", tuple(flat))

    @property
    def integrated_tail_exponent(self):  # type: ignore[override]
        return min(p.integrated_tail_exponent for p in self.parts)

    @property
    def tail_exponent(self):  # type: ignore[override]
        return min(p.tail_exponent for p in self.parts)

    def breakpoints(self):
        return sorted({b for p in self.parts for b in p.breakpoints()})

    def _sum(self, name, *args):
        return sum(getattr(p, name)(*args) for p in self.parts)

    def tail(self, x):
        return self._sum("tail", np.asarray(x, dtype=float))

    def integrated_tail(self, x):
        return self._sum("integrated_tail", np.asarray(x, dtype=float))

    def small_moment(self):
        return self._sum("small_moment")

    def large_moment(self):
        return self._sum("large_moment")

    def partial_moment(self, lo, hi):
        return self._sum("partial_moment", lo, hi)

    def total_mass(self):
        return self._sum("total_mass")

    def laplace_tail(self, beta):
        return self._sum("laplace_tail", beta)

    def laplace_integrated_tail(self, beta):
        return self._sum("laplace_integrated_tail", beta)

    def laplace_small_integrated_tail(self, beta, z):
        return self._sum("laplace_small_integrated_tail", beta, z)

    def laplace_large_part(self, beta, z):
        return self._sum("laplace_large_part", beta, z)

    def mean_shift(self, phi):
        return self._sum("mean_shift", phi)

    def tilted(self, phi):
        return CombinedJumps(tuple(p.tilted(phi) for p in self.parts))

    def power_kernel(self):
        singular = [p for p in self.parts if p.integrated_tail_exponent < 0]
        if len(singular) != 1:
            return None
        return singular[0].power_kernel()

    def integrated_tail_grid(self, grid):
        out = None
        for p in self.parts:
            g = p.integrated_tail_grid(grid)
            out = g if out is None else out + g
        return out

    def tail_grid(self, grid):
        out = None
        for p in self.parts:
            g = p.tail_grid(grid)
            out = g if out is None else out + g
        return out

    def small_integrated_tail_grid(self, grid, z):
        out = None
        for p in self.parts:
            g = p.small_integrated_tail_grid(grid, z)
            out = g if out is None else out + g
        return out

    def large_part(self, grid, z):
        out = MixedDistribution()
        atoms, dens = [], None
        for p in self.parts:
            part = p.large_part(grid, z)
            atoms.extend(part.atoms)
            if part.density is not None:
                dens = part.density if dens is None else dens + part.density
        out = MixedDistribution(atoms, dens)
        return out

    def finite_measure(self, grid):
        atoms, dens = [], None
        for p in self.parts:
            part = p.finite_measure(grid)
            atoms.extend(part.atoms)
            if part.density is not None:
                dens = part.density if dens is None else dens + part.density
        return MixedDistribution(atoms, dens)

    def describe(self):
        return "Combined(" + ",".join(p.describe() for p in self.parts) + ")"


# =============================================================================
# the model
# =============================================================================
@dataclass(frozen=True, eq=False)
class LevyModel:
    """A spectrally negative Levy process.

    Parameters
    ----------
    drift : float
        Drift value in the declared ``convention``.
    convention : DriftConvention or str
        ``"c"``, ``"c_prime"`` or ``"c_double_prime"``.
    sigma2 : float
        Coefficient of ``beta**2`` in psi.
    jumps : JumpMeasure
        Reflected Levy measure.

    Examples
    --------
    >>> m = LevyModel(1.0, "c", 1.0)
    >>> float(m.psi(1.0))
    2.0
    """

    drift: float = 0.0
    convention: DriftConvention = DriftConvention.C
    sigma2: float = 0.0
    jumps: JumpMeasure = field(default_factory=NoJumps)

    def __post_init__(self):
        object.__setattr__(self, "convention", DriftConvention(self.convention))
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")
        if self.convention is DriftConvention.C_PRIME and not math.isfinite(
            self.jumps.small_moment()
        ):
            raise NonConvergentIntegral("c' is undefined: small jumps have infinite variation")
        if self.convention is DriftConvention.C_DOUBLE_PRIME and not math.isfinite(
            self.jumps.large_moment()
        ):
            raise NonConvergentIntegral("c'' is undefined: the mean of large jumps is infinite")

    # ---------------------------------------------------------------- drifts
    @cached_property
    def _moments(self):
        return self.jumps.small_moment(), self.jumps.large_moment()

    @cached_property
    def constants(self) -> DriftConstants:
        s, l = self._moments
        conv, d = self.convention, float(self.drift)
        if conv is DriftConvention.C:
            c = d
        elif conv is DriftConvention.C_PRIME:
            c = d - s
        else:
            c = d + l
        c_prime = c + s if math.isfinite(s) else None
        c_double = c - l if math.isfinite(l) else None
        if conv is DriftConvention.C_PRIME:
            c_prime = d
        if conv is DriftConvention.C_DOUBLE_PRIME:
            c_double = d
        as_float = lambda v: None if v is None else float(v)  # noqa: E731
        return DriftConstants(as_float(c), as_float(c_prime), as_float(c_double))

    def _require(self, name: str) -> float:
        val = getattr(self.constants, name)
        if val is None:
            raise NonConvergentIntegral(f"drift constant {name} is undefined for this model")
        return val

    @property
    def c(self) -> float:
        return self._require("c")

    @property
    def c_prime(self) -> float:
        return self._require("c_prime")

    @property
    def c_double_prime(self) -> float:
        return self._require("c_double_prime")

    # ---------------------------------------------------------------- regime
    def has_bounded_variation_jumps(self) -> bool:
        return math.isfinite(self._moments[0])

    def has_finite_mean(self) -> bool:
        return math.isfinite(self._moments[1])

    def regime(self) -> Regime:
        """Classify the model; raises :class:`SubordinatorExcluded` for monotone paths."""
        if self.sigma2 > 0:
            return Regime.GAUSSIAN
        if self.has_bounded_variation_jumps():
            if not self.c_prime > 0:
                raise SubordinatorExcluded(
                    f"sigma2 = 0 and c' = {self.c_prime:g} <= 0: the paths are non-increasing"
                )
            return Regime.BOUNDED_VARIATION
        return Regime.UNBOUNDED_VARIATION

    # ------------------------------------------------------------------- psi
    def _psi_scalar(self, beta: float, representation: str | None) -> float:
        if beta == 0:
            return 0.0
        j = self.jumps
        rep = representation
        if rep is None:
            if self.has_bounded_variation_jumps():
                rep = "bv"
            elif self.has_finite_mean():
                rep = "mean"
            else:
                rep = "raw"
        gauss = self.sigma2 * beta * beta
        if rep == "bv":
            if not self.has_bounded_variation_jumps():
                raise NonConvergentIntegral("bounded-variation representation needs int_(0,1) y nu(dy) < inf")
            return self.c_prime * beta + gauss - beta * j.laplace_tail(beta)
        if rep == "mean":
            if not self.has_finite_mean():
                raise NonConvergentIntegral("mean representation needs int_[1,inf) y nu(dy) < inf")
            return self.c_double_prime * beta + gauss + beta * beta * j.laplace_integrated_tail(beta)
        if rep == "raw":
            return (
                self.c * beta
                + gauss
                + beta * beta * j.laplace_small_integrated_tail(beta, 1.0)
                + j.laplace_large_part(beta, 1.0)
            )
        raise ValueError(f"unknown representation {rep!r}")

    def psi(self, beta, representation: str | None = None):
        """Laplace exponent ``psi(beta) = log E exp(beta L_1)`` for ``beta >= 0``.

        ``representation`` forces ``"bv"``, ``"mean"`` or ``"raw"``; by
        default the bounded-variation form is used when available, then the
        finite-mean form, then the raw compensated integral.
        """
        b = np.asarray(beta, dtype=float)
        if np.any(b < 0):
            raise ValueError("psi is evaluated for beta >= 0 only")
        if b.ndim == 0:
            return self._psi_scalar(float(b), representation)
        return np.array([self._psi_scalar(float(x), representation) for x in b.ravel()]).reshape(
            b.shape
        )

    def psi_prime(self, beta: float) -> float:
        """``psi'(beta)``; at ``beta = 0`` this is the mean ``c''``."""
        if self.has_finite_mean():
            return self.c_double_prime + 2 * self.sigma2 * beta + self.jumps.mean_shift(beta)
        if beta <= 0:
            return -math.inf
        eps = 1e-6 * max(1.0, beta)
        return (self.psi(beta + eps) - self.psi(beta - eps)) / (2 * eps)

    def phi(self, q: float) -> float:
        """Right inverse ``Phi(q) = sup{beta : psi(beta) = q}``."""
        return right_inverse(self.psi, q)

    # ----------------------------------------------------------------- tails
    def tail(self, x):
        return self.jumps.tail(x)

    def integrated_tail(self, x):
        if not self.has_finite_mean():
            raise NonConvergentIntegral("int_[1,inf) y nu(dy) diverges")
        return self.jumps.integrated_tail(x)

    # ------------------------------------------------------------------ tilt
    def tilted(self, phi_value: float) -> "LevyModel":
        """Model with ``psi_phi(beta) = psi(beta + phi) - psi(phi)``."""
        jumps = self.jumps.tilted(phi_value)
        if self.has_bounded_variation_jumps():
            return LevyModel(
                self.c_prime + 2 * self.sigma2 * phi_value,
                DriftConvention.C_PRIME,
                self.sigma2,
                jumps,
            )
        return LevyModel(
            self.psi_prime(phi_value), DriftConvention.C_DOUBLE_PRIME, self.sigma2, jumps
        )

    def with_drift(self, drift: float, convention) -> "LevyModel":
        return LevyModel(drift, convention, self.sigma2, self.jumps)

    # ---------------------------------------------------------------- ident
    def fingerprint(self) -> str:
        text = (
            f"drift={self.drift!r};conv={self.convention.value};sigma2={self.sigma2!r};"
            f"jumps={self.jumps.describe()}"
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# =============================================================================
# functional interface
# =============================================================================
def right_inverse(psi_fn, q: float, tol: float = 1e-12, cap: float = BETA_CAP) -> float:
    """Largest root of ``psi_fn(beta) = q`` for a convex ``psi_fn`` with ``psi_fn(0) = 0``.

    The super-level set ``{psi > q}`` is the interval ``(Phi(q), inf)``, so a
    plain bisection on the predicate ``psi(beta) > q`` started from
    ``[0, beta_cap]`` converges to ``Phi(q)`` even when ``psi`` first dips
    below zero.
    """
    if q < 0:
        raise ValueError("q must be non-negative")
    hi = 1.0
    while not psi_fn(hi) > q:
        hi *= 2.0
        if hi > cap:
            raise RootNotBracketed(f"psi stays below q={q} up to beta={cap:g}")
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if psi_fn(mid) > q:
            hi = mid
        else:
            lo = mid
    # both ends bracket the root to within tol; return the end closer in value
    if lo == 0.0 and not psi_fn(hi) > q + 0.0:
        return 0.0
    return hi if abs(psi_fn(hi) - q) <= abs(psi_fn(lo) - q) else lo


def psi(model: LevyModel, beta, representation: str | None = None):
    return model.psi(beta, representation)


def phi(model: LevyModel, q: float) -> float:
    return model.phi(q)


def tail(model: LevyModel, x):
    return model.tail(x)


def integrated_tail(model: LevyModel, x):
    return model.integrated_tail(x)


def classify(model: LevyModel) -> Regime:
    return model.regime()


def drift_constants(model: LevyModel) -> DriftConstants:
    return model.constants


@dataclass(frozen=True, eq=False)
class TruncatedMeasure:
    """Split of the Levy measure at ``z >= 1`` into small and large jumps.

    Attributes
    ----------
    small_integrated_tail : GridFunction
        ``int_x^z (nu_bar(y) - nu_bar(z)) dy``, the integrated tail of
        ``nu`` restricted to ``(0, z)``.
    large_part : MixedDistribution
        ``nu`` restricted to ``[z, inf)`` on the grid.
    drift : float
        ``c''_z = c - int_[1,z) x nu(dx)``.
    mass : float
        ``nu([z, inf))``.
    """

    model: LevyModel
    z: float
    small_integrated_tail: GridFunction
    large_part: MixedDistribution
    drift: float
    mass: float

    def laplace_small(self, beta: float) -> float:
        """Quadrature value of ``L[small_integrated_tail](beta)``, grid free."""
        return self.model.jumps.laplace_small_integrated_tail(beta, self.z)

    def laplace_large_minus_mass(self, beta: float) -> float:
        """``L[nu_inf](beta) - ||nu_inf||``, grid free."""
        return self.model.jumps.laplace_large_part(beta, self.z)

    def psi(self, beta: float) -> float:
        """Reassembled Laplace exponent."""
        return (
            self.drift * beta
            + self.model.sigma2 * beta * beta
            + beta * beta * self.laplace_small(beta)
            + self.laplace_large_minus_mass(beta)
        )


def truncate_measure(model: LevyModel, z: float, grid: Grid) -> TruncatedMeasure:
    """Split ``nu`` at ``z`` into a finite-mean small part and a finite large part."""
    if z < 1:
        raise ValueError("z must be at least 1")
    j = model.jumps
    moment = j.partial_moment(1.0, z) if z > 1 else 0.0
    drift = model.c - moment
    return TruncatedMeasure(
        model=model,
        z=float(z),
        small_integrated_tail=j.small_integrated_tail_grid(grid, z),
        large_part=j.large_part(grid, z),
        drift=float(drift),
        mass=float(j.tail(np.asarray(float(z)))),
    )
