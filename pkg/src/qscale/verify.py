"""Independent checks: Laplace identity, ruin probabilities, growth classifier, oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import calculus
from .errors import DomainTooShort, NetProfitViolated
from .grid import Grid, GridFunction
from .levy import LevyModel, right_inverse

__all__ = [
    "LaplaceCheck",
    "laplace_transform",
    "verify_scale",
    "ruin_probability",
    "kappa_classifier",
    "brute_force_convolution_pmf",
]


def laplace_transform(f: GridFunction, beta):
    """``int_0^{x_max} e^{-beta x} f(x) dx``; a float for scalar ``beta``.

    Examples
    --------
    >>> from qscale.grid import Grid, GridFunction
    >>> g = Grid.from_xmax(40.0, 1 / 64)
    >>> round(laplace_transform(GridFunction.identity(g), 2.0), 6)
    0.25
    """
    out = calculus.laplace_transform(f, beta)
    return float(out[0]) if np.ndim(beta) == 0 else out


@dataclass(frozen=True)
class LaplaceCheck:
    """Outcome of the Laplace identity check ``L[W](beta) (psi(beta) - q) = 1``.

    Attributes
    ----------
    betas : ndarray
    residuals : ndarray
        ``|L[W](beta) (psi(beta) - q) - 1|``.
    truncation_bounds : ndarray
        Bound on the residual contributed by the neglected integral beyond
        ``x_max``, assuming ``W(x) <= W(x_max) e^{Phi (x - x_max)}``.
    tolerance : float
    phi : float
    passed : bool
        All residuals below ``tolerance + truncation_bounds``.
    """

    betas: np.ndarray
    residuals: np.ndarray
    truncation_bounds: np.ndarray
    tolerance: float
    phi: float
    passed: bool

    @property
    def truncation_bound(self) -> float:
        return float(np.max(self.truncation_bounds))

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))


def verify_scale(
    model,
    q: float,
    table,
    tol: float = 1e-2,
    n_beta: int = 12,
    beta_min: float | None = None,
) -> LaplaceCheck:
    """Check the defining Laplace identity of a tabulated scale function.

    Parameters
    ----------
    model : LevyModel or callable
        The model, or its Laplace exponent ``psi``.
    q : float
    table : ScaleTable or GridFunction
    tol : float
        Relative tolerance ``tau``.
    n_beta : int
        Number of geometrically spaced test points in ``[beta_min, 10 beta_min]``.
    beta_min : float, optional
        Defaults to ``Phi(q) + max(1, 5/x_max log(10/tau))``.

    Raises
    ------
    DomainTooShort
        If ``exp((Phi(q) - beta_min) x_max) >= tau / 10``.
    """
    W = getattr(table, "W", table)
    psi_fn = model.psi if isinstance(model, LevyModel) else model
    phi_q = model.phi(q) if isinstance(model, LevyModel) else right_inverse(psi_fn, q)
    x_max = W.grid.x_max
    if beta_min is None:
        beta_min = phi_q + max(1.0, 5.0 / x_max * math.log(10.0 / tol))
    if not math.exp((phi_q - beta_min) * x_max) < tol / 10:
        raise DomainTooShort(
            f"x_max = {x_max:g} is too short for beta_min = {beta_min:g} (Phi = {phi_q:g})"
        )
    betas = np.geomspace(beta_min, 10 * beta_min, n_beta)
    lap = calculus.laplace_transform(W, betas)
    psis = np.array([float(psi_fn(b)) for b in betas]) - q
    residuals = np.abs(lap * psis - 1.0)
    w_end = abs(float(W(x_max)))
    bounds = w_end * np.exp(-betas * x_max) / (betas - phi_q) * np.abs(psis)
    passed = bool(np.all(residuals < tol + bounds))
    return LaplaceCheck(betas, residuals, bounds, tol, phi_q, passed)


def ruin_probability(
    model: LevyModel, x, step: float = 1 / 512, grid: Grid | None = None, table=None
):
    """``P(ruin | start at x) = 1 - psi'(0+) W^(0)(x)``.

    Parameters
    ----------
    model : LevyModel
        A model with finite mean ``psi'(0+) = c''``.
    x : float or array_like
    step : float
        Grid step used when ``grid`` is not given.
    table : ScaleTable, optional
        Precomputed ``W^(0)`` to reuse.

    Raises
    ------
    NetProfitViolated
        If ``psi'(0+) <= 0``.
    """
    from .scale import scale_function

    mean = model.c_double_prime
    if not mean > 0:
        raise NetProfitViolated(f"psi'(0+) = {mean:g} <= 0: ruin is certain")
    x = np.asarray(x, dtype=float)
    if table is None:
        if grid is None:
            grid = Grid.from_xmax(max(float(np.max(x)), 4 * step) + step, step)
        table = scale_function(model, 0.0, grid)
    W = table.W
    vals = np.where(x > 0, W(np.maximum(x, 0.0)), W.value_at_zero())
    out = np.clip(1.0 - mean * vals, 0.0, 1.0)
    return out if out.ndim else float(out)


def kappa_classifier(f: GridFunction, margin: float = 0.02) -> int:
    """Growth class of ``f`` at the origin.

    The slope ``m`` of ``log |f|`` against ``log x`` is fitted on the nodes in
    ``[x_1, 10 x_1]`` (``x_1`` the second node).  The result is ``2`` when
    ``m > -1/2 + margin``, i.e. ``|f(x)| <= C x**(a - 1/2)`` for some
    ``a > 0``, and ``1`` otherwise.
    """
    x = f.grid.nodes
    if np.count_nonzero(x < 0.5) < 16:
        raise ValueError("kappa_classifier needs at least 16 nodes in (0, 0.5)")
    lo = x[1]
    sel = (x >= lo) & (x <= 10 * lo * (1 + 1e-12))
    vals = np.abs(f.samples[sel])
    if np.any(vals == 0):
        return 2
    slope = np.polyfit(np.log(x[sel]), np.log(vals), 1)[0]
    return 2 if slope > -0.5 + margin else 1


def brute_force_convolution_pmf(pmf, n: int, tol: float = 1e-14) -> np.ndarray:
    """``n``-fold convolution of a pmf on ``0, 1, 2, ...`` by direct summation.

    Trailing masses below ``tol`` are dropped before convolving.

    Examples
    --------
    >>> brute_force_convolution_pmf([0.0, 1.0], 3).tolist()
    [0.0, 0.0, 0.0, 1.0]
    """
    p = np.asarray(pmf, dtype=float)
    keep = np.flatnonzero(p > tol)
    p = p[: keep[-1] + 1] if keep.size else p[:1]
    out = np.array([1.0])
    for _ in range(n):
        res = np.zeros(out.size + p.size - 1)
        for j, pj in enumerate(p):
            if pj:
                res[j : j + out.size] += pj * out
        out = res
    return out
