"""Jump laws: atoms plus an optional tabulated density, and a few closed-form laws.

Two kinds of objects share one informal interface (``tail``,
``integrated_tail``, ``laplace``, ``mean``, ``partial_mean``, ``mean_exp``,
``tilted``, ``total_mass``, ``min_support``, ``to_mixed``):

* :class:`MixedDistribution`, a finite measure made of point masses and a
  :class:`~qscale.grid.GridFunction` density, which is what the convolution
  machinery consumes, and
* :class:`ExponentialLaw`, kept analytic so that Laplace exponents and tails
  of the classical Cramer-Lundberg model are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .calculus import cell_integrals, convolve, laplace_transform, shift
from .errors import GridMismatch
from .grid import Grid, GridFunction

__all__ = [
    "MixedDistribution",
    "ExponentialLaw",
    "dirac",
    "geometric",
    "zero_truncated_poisson",
    "poisson_pmf",
    "negative_binomial_mass",
]


def _as_atoms(atoms) -> tuple[tuple[float, float], ...]:
    merged: dict[float, float] = {}
    for loc, mass in atoms:
        loc, mass = float(loc), float(mass)
        if loc < 0:
            raise ValueError("atom locations must be non-negative")
        if mass == 0:
            continue
        merged[loc] = merged.get(loc, 0.0) + mass
    return tuple(sorted(merged.items()))


@dataclass(frozen=True, eq=False)
class MixedDistribution:
    """Finite measure ``sum_i m_i delta_{a_i} + p(x) dx`` on ``[0, inf)``.

    Parameters
    ----------
    atoms : sequence of (location, mass)
        Point masses.  Duplicate locations are merged and the list is kept
        sorted, so locations are strictly increasing.
    density : GridFunction, optional
        Density on ``(0, x_max]``; it is taken to vanish beyond the grid.

    Examples
    --------
    >>> d = MixedDistribution([(1.0, 0.5), (2.0, 0.5)])
    >>> d.total_mass()
    1.0
    """

    atoms: tuple = ()
    density: GridFunction | None = None
    _cum: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", _as_atoms(self.atoms))
        if self.density is not None:
            d = self.density
            cells = cell_integrals(d.grid, d.exponent) * d.values
            object.__setattr__(self, "_cum", np.concatenate(([0.0], np.cumsum(cells))))

    # ------------------------------------------------------------------ basic
    @property
    def atom_locations(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms], dtype=float)

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    def is_empty(self) -> bool:
        return not self.atoms and (self.density is None or self.density.is_zero())

    def total_mass(self) -> float:
        mass = float(self.atom_masses.sum()) if self.atoms else 0.0
        if self.density is not None:
            mass += float(self._cum[-1])
        return mass

    def min_support(self) -> float:
        """Left end of the support (``inf`` for the zero measure)."""
        lo = math.inf
        if self.atoms:
            lo = self.atoms[0][0]
        if self.density is not None and np.any(self.density.values):
            first = int(np.flatnonzero(self.density.values)[0])
            lo = min(lo, first * self.density.grid.step)
        return lo

    def scaled(self, factor: float) -> "MixedDistribution":
        dens = None if self.density is None else self.density * factor
        return MixedDistribution([(a, m * factor) for a, m in self.atoms], dens)

    def normalized(self) -> "MixedDistribution":
        return self.scaled(1.0 / self.total_mass())

    # -------------------------------------------------------------- integrals
    def _density_tail(self, x):
        """``int_x^inf p`` with the density's cell integrals interpolated linearly."""
        d = self.density
        edges = d.grid.edges
        cum = np.interp(np.clip(x, 0.0, edges[-1]), edges, self._cum)
        return self._cum[-1] - cum

    def tail(self, x):
        """``mu([x, inf))``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for loc, mass in self.atoms:
            out = out + np.where(loc >= x, mass, 0.0)
        if self.density is not None:
            out = out + self._density_tail(x)
        return out

    def _density_moment(self, weight):
        d = self.density
        return float(np.sum(cell_integrals(d.grid, d.exponent) * d.values * weight(d.grid.nodes)))

    def integrated_tail(self, x):
        """``int_x^inf mu([y, inf)) dy = int (y - x)_+ mu(dy)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for loc, mass in self.atoms:
            out = out + mass * np.maximum(loc - x, 0.0)
        if self.density is not None:
            d = self.density
            w = cell_integrals(d.grid, d.exponent) * d.values
            nodes = d.grid.nodes
            flat = np.atleast_1d(x)
            vals = np.array(
                [np.sum(w * np.maximum(nodes - xx, 0.0)) for xx in flat.ravel()]
            ).reshape(flat.shape)
            out = out + (vals if np.ndim(x) else vals[0])
        return out

    def laplace(self, beta):
        """``int e^{-beta x} mu(dx)``."""
        beta = np.asarray(beta, dtype=float)
        out = np.zeros_like(beta)
        for loc, mass in self.atoms:
            out = out + mass * np.exp(-beta * loc)
        if self.density is not None:
            out = out + laplace_transform(self.density, np.atleast_1d(beta)).reshape(beta.shape)
        return out

    def laplace_tail(self, beta):
        """``int e^{-beta x} mu([x, inf)) dx = (||mu|| - L mu(beta)) / beta``."""
        beta = np.asarray(beta, dtype=float)
        return (self.total_mass() - self.laplace(beta)) / beta

    def partial_mean(self, lo: float = 0.0, hi: float = math.inf) -> float:
        """``int_[lo, hi) y mu(dy)``."""
        total = sum(m * a for a, m in self.atoms if lo <= a < hi)
        if self.density is not None:
            total += self._density_moment(lambda y: np.where((y >= lo) & (y < hi), y, 0.0))
        return float(total)

    def mean(self) -> float:
        return self.partial_mean()

    def mean_exp(self, phi: float) -> float:
        """``int y e^{-phi y} mu(dy)``."""
        total = sum(m * a * math.exp(-phi * a) for a, m in self.atoms)
        if self.density is not None:
            total += self._density_moment(lambda y: y * np.exp(-phi * y))
        return float(total)

    def tilted(self, phi: float) -> "MixedDistribution":
        """The (unnormalised) measure ``e^{-phi x} mu(dx)``."""
        atoms = [(a, m * math.exp(-phi * a)) for a, m in self.atoms]
        dens = None
        if self.density is not None:
            dens = self.density * np.exp(-phi * self.density.grid.nodes)
        return MixedDistribution(atoms, dens)

    def restricted(self, lo: float = 0.0, hi: float = math.inf) -> "MixedDistribution":
        """The restriction to ``[lo, hi)`` (density cells selected by midpoint)."""
        atoms = [(a, m) for a, m in self.atoms if lo <= a < hi]
        dens = None
        if self.density is not None:
            x = self.density.grid.nodes
            keep = (x >= lo) & (x < hi)
            dens = GridFunction(
                self.density.grid, np.where(keep, self.density.values, 0.0), self.density.exponent
            )
        return MixedDistribution(atoms, dens)

    # ------------------------------------------------------------- algebra
    def to_mixed(self, grid: Grid) -> "MixedDistribution":
        if self.density is not None and self.density.grid != grid:
            raise GridMismatch("density lives on a different grid")
        return self

    def convolve(self, other: "MixedDistribution") -> "MixedDistribution":
        """Convolution of measures; atoms times atoms stay atoms."""
        atoms = [
            (a1 + a2, m1 * m2) for a1, m1 in self.atoms for a2, m2 in other.atoms
        ]
        dens = None
        parts = []
        if self.density is not None:
            for a, m in other.atoms:
                parts.append(shift(self.density, a) * m if a > 0 else self.density * m)
        if other.density is not None:
            for a, m in self.atoms:
                parts.append(shift(other.density, a) * m if a > 0 else other.density * m)
        if self.density is not None and other.density is not None:
            parts.append(convolve(self.density, other.density))
        for p in parts:
            dens = p if dens is None else dens + p
        return MixedDistribution(atoms, dens)

    def __repr__(self) -> str:
        dens = "none" if self.density is None else repr(self.density)
        return f"MixedDistribution(atoms={list(self.atoms)!r}, density={dens})"


@dataclass(frozen=True)
class ExponentialLaw:
    """Exponential probability law with the given rate.

    All functionals are closed form; :meth:`to_mixed` tabulates the density
    on a grid for the convolution routines.
    """

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def total_mass(self) -> float:
        return 1.0

    def min_support(self) -> float:
        return 0.0

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.exp(-self.rate * np.maximum(x, 0.0)), 1.0)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.rate * np.maximum(x, 0.0)) / self.rate - np.minimum(x, 0.0)

    def laplace(self, beta):
        beta = np.asarray(beta, dtype=float)
        return self.rate / (self.rate + beta)

    def laplace_tail(self, beta):
        beta = np.asarray(beta, dtype=float)
        return 1.0 / (self.rate + beta)

    def mean(self) -> float:
        return 1.0 / self.rate

    def partial_mean(self, lo: float = 0.0, hi: float = math.inf) -> float:
        t = self.rate

        def prim(y):
            # int_0^y s t e^{-t s} ds
            if math.isinf(y):
                return 1.0 / t
            return (1.0 - math.exp(-t * y) * (1.0 + t * y)) / t

        return prim(hi) - prim(lo)

    def mean_exp(self, phi: float) -> float:
        return self.rate / (self.rate + phi) ** 2

    def tilted(self, phi: float):
        """``e^{-phi x}`` times the law: mass ``rate/(rate+phi)``, shape Exp(rate+phi)."""
        return _ScaledLaw(self.rate / (self.rate + phi), ExponentialLaw(self.rate + phi))

    def to_mixed(self, grid: Grid) -> MixedDistribution:
        return MixedDistribution(
            (), GridFunction.from_function(grid, lambda x: self.rate * np.exp(-self.rate * x))
        )


@dataclass(frozen=True)
class _ScaledLaw:
    """A law multiplied by a positive constant (result of an exponential tilt)."""

    factor: float
    law: object

    def total_mass(self):
        return self.factor * self.law.total_mass()

    def min_support(self):
        return self.law.min_support()

    def tail(self, x):
        return self.factor * self.law.tail(x)

    def integrated_tail(self, x):
        return self.factor * self.law.integrated_tail(x)

    def laplace(self, beta):
        return self.factor * self.law.laplace(beta)

    def laplace_tail(self, beta):
        return self.factor * self.law.laplace_tail(beta)

    def mean(self):
        return self.factor * self.law.mean()

    def partial_mean(self, lo=0.0, hi=math.inf):
        return self.factor * self.law.partial_mean(lo, hi)

    def mean_exp(self, phi):
        return self.factor * self.law.mean_exp(phi)

    def tilted(self, phi):
        inner = self.law.tilted(phi)
        return _ScaledLaw(self.factor * inner.factor, inner.law) if isinstance(
            inner, _ScaledLaw
        ) else inner.scaled(self.factor)

    def to_mixed(self, grid):
        return self.law.to_mixed(grid).scaled(self.factor)


# ----------------------------------------------------------------- factories
def dirac(location: float, mass: float = 1.0) -> MixedDistribution:
    return MixedDistribution([(location, mass)])


def geometric(p: float, tol: float = 1e-16, max_atoms: int = 10_000) -> MixedDistribution:
    """Geometric law ``(1-p)^(k-1) p`` on ``k = 1, 2, ...``, truncated at tail mass ``tol``."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    atoms = []
    k = 1
    tail = 1.0
    while tail > tol and k <= max_atoms:
        mass = (1 - p) ** (k - 1) * p
        atoms.append((float(k), mass))
        tail -= mass
        k += 1
    return MixedDistribution(atoms)


def negative_binomial_mass(k: int, n: int, p: float) -> float:
    """Mass at ``k`` of the ``n``-fold convolution of :func:`geometric` ``(p)``.

    Equals ``C(k-1, n-1) p**n (1-p)**(k-n)`` for ``k >= n`` and zero below.

    Examples
    --------
    >>> negative_binomial_mass(3, 2, 0.5)
    0.25
    """
    if n == 0:
        return 1.0 if k == 0 else 0.0
    if k < n:
        return 0.0
    return math.comb(k - 1, n - 1) * p**n * (1 - p) ** (k - n)


def poisson_pmf(mu: float, tol: float = 1e-14) -> np.ndarray:
    """Poisson pmf on ``0..K`` where ``K`` is the first index leaving tail mass below ``tol``."""
    kmax = int(stats.poisson.isf(tol, mu)) + 1
    k = np.arange(kmax + 1)
    return stats.poisson.pmf(k, mu)


def zero_truncated_poisson(mu: float, tol: float = 1e-14) -> MixedDistribution:
    """Poisson(``mu``) conditioned to be positive, as atoms on ``1, 2, ...``."""
    pmf = poisson_pmf(mu, tol)
    norm = -math.expm1(-mu)
    return MixedDistribution([(float(k), pmf[k] / norm) for k in range(1, pmf.size)])
