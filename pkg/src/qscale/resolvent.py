"""First-kind Volterra resolvents and renewal equations.

:func:`solve_resolvent` finds ``rho`` with ``rho * k = 1`` for a kernel ``k``
with an integrable singularity ``k(x) ~ x**s`` (``-1 < s < 0``).  The
discretisation is the product integration rule of
:func:`qscale.calculus.convolve`, so the returned ``rho`` reproduces ``1``
exactly (up to rounding) when convolved with ``k`` on the same grid.  The
system is lower triangular: output ``i`` involves ``rho`` at nodes ``<= i``,
except that the first two outputs share the two first nodes through the
linear extrapolation towards the origin.  It is solved by forward
substitution, with each output evaluated in ``O(i)`` operations.

:func:`solve_renewal` solves ``f = 1 + g * f'`` with ``f(0+) = 0`` through
convolution series built on a resolvent or on an auxiliary kernel ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import calculus as _calc
from .calculus import convolve, derivative, primitive
from .errors import (
    KernelMismatch,
    NoResolvent,
    NotConverged,
    NotPositive,
    RegimeMismatch,
    SingularSystem,
)
from .grid import Grid, GridFunction
from .series import SeriesSpec, convolution_series

__all__ = [
    "ResolventResult",
    "RenewalResult",
    "solve_resolvent",
    "resolvent_via_compensated",
    "solve_renewal",
    "renewal_residual",
    "check_log_convexity",
    "RESOLVENT_TOL",
]

RESOLVENT_TOL = 1e-2


@dataclass(frozen=True, eq=False)
class ResolventResult:
    """Resolvent ``rho`` of a kernel together with its residual.

    Attributes
    ----------
    rho : GridFunction
    residual : GridFunction
        ``rho * k - 1`` evaluated with a three times finer product rule and
        sampled back at the nodes of ``rho``.
    max_residual : float
        ``max |residual|`` over ``[3h, x_max]``.
    method : str
        ``"direct"``, ``"compensated"`` or ``"closed-form"``.
    refinements : int
        How many times the grid was refined to meet the tolerance.
    """

    rho: GridFunction
    residual: GridFunction
    max_residual: float
    method: str
    refinements: int = 0


# =============================================================================
# forward substitution
# =============================================================================
class _TriangularConvolution:
    """Evaluate single outputs of the dimensionless product rule ``S = r_f (*) r_g``.

    Mirrors :func:`qscale.calculus._dimensionless_convolution` output by
    output so that the unknown ``r_f`` can be found node by node.
    """

    def __init__(self, rg: np.ndarray, a: float, b: float):
        n = rg.size
        self.n, self.a, self.b = n, a, b
        self.rg = rg
        self.eg = _calc._extend(rg)
        self.r = np.zeros(n + 2)
        kf, kg = _calc._zones(a, b, n)
        self.kf, self.kg = kf, kg
        self.xi = _calc._XI / 4.0
        self.wq = _calc._WQ / 4.0

        def q_side(lower):
            Q = _calc._interp_at_gauss(rg, lower, "g")
            pw = _calc._gauss_powers(b, n, lower, "g")
            if pw is not None:
                Q = Q * pw
            Q = np.array(Q)
            Q[:, :kg] = 0.0
            return Q * self.wq[:, None]

        self.QL, self.QU = q_side(True), q_side(False)
        ones = np.ones((_calc.GAUSS_POINTS, n))
        pl = _calc._gauss_powers(a, n, True, "f")
        pu = _calc._gauss_powers(a, n, False, "f")
        self.powL = np.array(ones if pl is None else pl)
        self.powU = np.array(ones if pu is None else pu)
        self.powL[:, :kf] = 0.0
        self.powU[:, :kf] = 0.0
        self.PL = np.zeros((_calc.GAUSS_POINTS, n))
        self.PU = np.zeros((_calc.GAUSS_POINTS, n))
        self.tables = _calc._near_tables(a, b, n, kf, kg)

    # node access with the virtual node at -1
    def _f(self, idx):
        if idx == -1:
            return 2 * self.r[0] - self.r[1]
        return self.r[idx]

    def _g(self, idx):
        return self.eg[min(max(idx, -1), self.n) + 1]

    def _update(self, k):
        if k < 0 or k >= self.n:
            return
        xi = self.xi
        self.PL[:, k] = (self._f(k - 1) * (0.25 - xi) + self.r[k] * (0.75 + xi)) * self.powL[:, k]
        self.PU[:, k] = (self.r[k] * (0.75 - xi) + self.r[k + 1] * (0.25 + xi)) * self.powU[:, k]

    def set(self, idx, value):
        self.r[idx] = value
        for k in (idx - 1, idx, idx + 1):
            self._update(k)
        if idx in (0, 1):
            self._update(0)

    def output(self, i: int) -> float:
        acc = 0.0
        QL, QU = self.QL, self.QU
        for j in range(_calc.GAUSS_POINTS):
            acc += np.dot(self.PL[j, : i + 1], QL[j, i::-1])
            if i:
                acc += np.dot(self.PU[j, :i], QU[j, i - 1 :: -1])
        WLf, WUf, WLg, WUg = self.tables
        for k in range(min(self.kf, i + 1)):
            fl = (self._f(k - 1), self._f(k))
            fu = (self._f(k), self._f(k + 1))
            gg = (self._g(i - k - 1), self._g(i - k))
            wl, wu = WLf[i, k], WUf[i, k]
            for p in (0, 1):
                for q in (0, 1):
                    acc += fl[p] * gg[q] * wl[p, q] + fu[p] * gg[q] * wu[p, q]
        for m in range(min(self.kg, i + 1)):
            gl = (self._g(m - 1), self._g(m))
            gu = (self._g(m), self._g(m + 1))
            ff = (self._f(i - m - 1), self._f(i - m))
            wl, wu = WLg[i, m], WUg[i, m]
            for p in (0, 1):
                for q in (0, 1):
                    acc += gl[p] * ff[q] * wl[p, q] + gu[p] * ff[q] * wu[p, q]
        return float(acc)


def _forward_solve(rg: np.ndarray, a: float, b: float, target: np.ndarray) -> np.ndarray:
    """Solve ``S(r) = target`` for the regular factor ``r`` of exponent ``a``."""
    n = rg.size
    tri = _TriangularConvolution(rg, a, b)
    scale = max(1.0, float(np.max(np.abs(target))))
    # first two unknowns together
    cols = []
    for r0, r1 in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)):
        tri.set(0, r0)
        tri.set(1, r1)
        cols.append((tri.output(0), tri.output(1)))
    base = np.array(cols[0])
    A = np.column_stack([np.array(cols[1]) - base, np.array(cols[2]) - base])
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if not abs(det) > 1e-300:
        raise SingularSystem("the first 2x2 block of the product rule is singular")
    sol = np.linalg.solve(A, target[:2] - base)
    tri.set(0, sol[0])
    tri.set(1, sol[1])
    for i in range(2, n):
        tri.set(i, 0.0)
        out0 = tri.output(i)
        tri.set(i, 1.0)
        d = tri.output(i) - out0
        if not abs(d) > 1e-300 * scale:
            raise SingularSystem(f"vanishing diagonal weight at node {i}")
        tri.set(i, (target[i] - out0) / d)
    return tri.r[:n].copy()


def _residual_on_refined(rho: GridFunction, kernel: GridFunction, kernel_fn, factor: int = 3):
    """``rho * k - 1`` by the product rule on a finer grid, sampled back."""
    grid = rho.grid
    fine = grid.refine(factor)
    rf = GridFunction(fine, rho.regular_at(fine.nodes), rho.exponent)
    if kernel_fn is not None:
        kf = GridFunction.from_function(fine, kernel_fn, kernel.exponent)
    else:
        kf = GridFunction(fine, kernel.regular_at(fine.nodes), kernel.exponent)
    conv = convolve(rf, kf)
    vals = conv.samples[factor // 2 :: factor] - 1.0
    return GridFunction(grid, vals, 0.0)


def solve_resolvent(
    kernel: GridFunction,
    expected_exponent: float | None = None,
    tol: float = RESOLVENT_TOL,
    kernel_fn=None,
    max_refinements: int = 2,
    require_positive: bool = True,
) -> ResolventResult:
    """Solve ``rho * kernel = 1`` by forward substitution.

    Parameters
    ----------
    kernel : GridFunction
        Kernel with declared origin exponent ``s`` in ``(-1, 0)``.
    expected_exponent : float, optional
        Origin exponent of ``rho``; defaults to ``-(1 + s)`` so that the
        convolution is constant.
    tol : float
        Target for the refined residual on ``[3h, x_max]``.
    kernel_fn : callable, optional
        Exact kernel values, used when a finer grid is needed.  Without it
        the kernel's regular factor is interpolated.
    max_refinements : int
        How many times the grid may be refined by three on residual failure.
    require_positive : bool
        Raise :class:`NotPositive` if any node of ``rho`` is not positive.

    Raises
    ------
    SingularSystem
        If the exponent of ``rho`` would not be integrable or a diagonal
        weight vanishes.
    NotPositive
    """
    s = kernel.exponent
    a = -(1.0 + s) if expected_exponent is None else float(expected_exponent)
    if not a > -1:
        raise SingularSystem(
            f"resolvent exponent {a:g} is not integrable (kernel exponent {s:g}); "
            "a bounded kernel has no locally integrable resolvent"
        )
    if kernel.is_zero():
        raise SingularSystem("the kernel vanishes identically")
    grid = kernel.grid
    work_kernel = kernel
    refinements = 0
    while True:
        g = work_kernel.grid
        target = np.full(g.count, g.step ** (-(1.0 + a + s)))
        r = _forward_solve(work_kernel.values, _calc._key(a), _calc._key(s), target)
        rho_w = GridFunction(g, r, a)
        if refinements:
            factor = 3**refinements
            rho = GridFunction(grid, r[factor // 2 :: factor], a)
        else:
            rho = rho_w
        if require_positive and np.any(rho_w.values <= 0):
            bad = int(np.argmax(rho_w.values <= 0))
            raise NotPositive(f"resolvent is not positive at node {bad}")
        resid = _residual_on_refined(rho, kernel, kernel_fn)
        mask = grid.nodes >= 3 * grid.step
        max_res = float(np.max(np.abs(resid.values[mask]))) if np.any(mask) else 0.0
        if max_res <= tol or refinements >= max_refinements:
            return ResolventResult(rho, resid, max_res, "direct", refinements)
        refinements += 1
        fine = grid.refine(3**refinements)
        if kernel_fn is not None:
            work_kernel = GridFunction.from_function(fine, kernel_fn, s)
        else:
            work_kernel = GridFunction(fine, kernel.regular_at(fine.nodes), s)


def resolvent_via_compensated(model, grid: Grid, kernel_spec=None) -> ResolventResult:
    """``rho = W~'`` where ``W~`` is the 0-scale function of the zero-mean model.

    ``W~`` is computed by the unbounded variation series with a power kernel
    (or the given ``kernel_spec``) and differentiated with the product rule.
    """
    from .levy import DriftConvention, Regime
    from .scale import PowerKernel, scale_unbounded_variation

    if model.regime() is not Regime.UNBOUNDED_VARIATION:
        raise RegimeMismatch("the compensated resolvent needs unbounded variation without a Gaussian part")
    compensated = model.with_drift(0.0, DriftConvention.C_DOUBLE_PRIME)
    if kernel_spec is None:
        pk = model.jumps.power_kernel()
        if pk is None:
            raise RegimeMismatch("no power kernel is known for this jump measure; pass kernel_spec")
        kernel_spec = PowerKernel(*pk)
    table = scale_unbounded_variation(compensated, 0.0, grid, kernel_spec)
    rho = derivative(table.W)
    nbb = model.jumps.integrated_tail_grid(grid)
    resid = _residual_on_refined(rho, nbb, model.jumps.integrated_tail)
    mask = grid.nodes >= 3 * grid.step
    max_res = float(np.max(np.abs(resid.values[mask])))
    return ResolventResult(rho, resid, max_res, "compensated")


# =============================================================================
# renewal equations
# =============================================================================
@dataclass(frozen=True, eq=False)
class RenewalResult:
    """Solution of ``f = 1 + g * f'`` with diagnostics.

    Attributes
    ----------
    f : GridFunction
        The selected solution.
    derivative : GridFunction
        ``f'`` as produced by the series (before the outer primitive).
    variant : str
        Name of the selected variant.
    residual : float
        ``max |f - 1 - g * f'|`` over ``[5h, x_max]`` for the selected variant.
    residuals : dict
        Residual of every variant that could be computed.
    candidates : dict
        ``variant -> f`` for every computed variant.
    """

    f: GridFunction
    derivative: GridFunction
    variant: str
    residual: float
    residuals: dict = field(default_factory=dict)
    candidates: dict = field(default_factory=dict)


RENEWAL_VARIANTS = (
    "resolvent",
    "kernel-h",
    "resolvent-alternating",
    "kernel-h-alternating",
)


def renewal_residual(f: GridFunction, df: GridFunction, g: GridFunction) -> GridFunction:
    """``f - 1 - g * f'`` on the grid."""
    return f - 1.0 - convolve(g, df)


def _max_on(resid: GridFunction, start: float) -> float:
    mask = resid.grid.nodes >= start
    return float(np.max(np.abs(resid.samples[mask])))


def _signed_resolvent(g: GridFunction, tol: float, kernel_fn) -> GridFunction:
    sign = 1.0 if float(np.sum(g.values)) >= 0 else -1.0
    fn = None if kernel_fn is None else (lambda x: sign * np.asarray(kernel_fn(x)))
    res = solve_resolvent(g * sign, tol=tol, kernel_fn=fn)
    return res.rho * sign


def _series(term: GridFunction, weights, tol, max_terms, kernel=None):
    spec = SeriesSpec(term, weights=weights, kernel=kernel, tol=tol, max_terms=max_terms)
    return convolution_series(spec)


def solve_renewal(
    g: GridFunction,
    variant: str = "auto",
    h: GridFunction | None = None,
    tol: float | None = None,
    max_terms: int = 200,
    resolvent_tol: float = RESOLVENT_TOL,
    kernel_fn=None,
    mismatch_tol: float = 5e-2,
) -> RenewalResult:
    """Solve the renewal equation ``f = 1 + g * f'`` with ``f(0+) = 0``.

    Variants (``F`` is the Laplace transform of ``f``):

    ``resolvent``
        ``f = -1 * sum_{n >= 1} rho^(*n)`` with ``rho * g = 1``.
    ``kernel-h``
        ``f = -1 * h * sum_{n >= 0} (h - g_h)^(*n)`` with
        ``(g * h)(0+) = 1`` and ``g_h = (g * h)'``.
    ``resolvent-alternating`` / ``kernel-h-alternating``
        The same series with alternating signs,
        ``1 * sum_{n >= 1} (-1)**n rho^(*n)`` and
        ``1 * h * sum_{n >= 1} (-1)**n (h + g_h)^(*(n-1))``.  These solve
        ``f = -1 - g * f'`` and are kept for comparison.
    ``auto``
        Compute every applicable variant and return the one with the
        smallest residual of ``f = 1 + g * f'``.

    Parameters
    ----------
    g : GridFunction
        Kernel with a negative origin exponent (a bounded ``g`` has no locally
        integrable resolvent).
    h : GridFunction, optional
        Kernel for the ``kernel-h`` variants; defaults to the resolvent of ``g``.

    Raises
    ------
    NoResolvent
        If ``g`` is zero or bounded at the origin and no ``h`` is given.
    KernelMismatch
        If ``(g * h)(3 dx)`` differs from one by more than ``mismatch_tol``.
    """
    grid = g.grid
    if variant != "auto" and variant not in RENEWAL_VARIANTS:
        raise ValueError(f"variant must be 'auto' or one of {RENEWAL_VARIANTS}")
    if g.is_zero():
        raise NoResolvent("g vanishes identically: the equation reads f = 1")
    wanted = RENEWAL_VARIANTS if variant == "auto" else (variant,)
    needs_rho = any(v.startswith("resolvent") for v in wanted) or h is None
    rho = None
    if needs_rho:
        if not g.exponent < 0:
            raise NoResolvent("g is bounded at the origin, so it has no integrable resolvent")
        rho = _signed_resolvent(g, resolvent_tol, kernel_fn)
    one = GridFunction.constant(grid, 1.0)
    candidates: dict = {}
    derivs: dict = {}
    residuals: dict = {}

    def record(name, df):
        f = primitive(df)
        candidates[name] = f
        derivs[name] = df
        residuals[name] = _max_on(renewal_residual(f, df, g), 5 * grid.step)

    if "resolvent" in wanted:
        S, _ = _series(rho, None, tol, max_terms)
        record("resolvent", -S)
    if "resolvent-alternating" in wanted:
        S, _ = _series(rho, lambda n: (-1.0) ** n, tol, max_terms)
        record("resolvent-alternating", S)
    if any(v.startswith("kernel-h") for v in wanted):
        hh = h if h is not None else rho
        gh_conv = convolve(g, hh)
        check = float(gh_conv(3 * grid.step))
        if not abs(check - 1.0) <= mismatch_tol:
            raise KernelMismatch(f"(g * h)(3h) = {check:.4g}, expected 1")
        g_h = derivative(gh_conv)
        if "kernel-h" in wanted:
            S, _ = _series(hh - g_h, None, tol, max_terms, kernel=hh)
            record("kernel-h", -S)
        if "kernel-h-alternating" in wanted:
            # h * sum_{n>=1} (-1)^n (h + g_h)^(*(n-1)) = -h * sum_{m>=0} (-1)^m (h + g_h)^(*m)
            S, _ = _series(hh + g_h, lambda m: -((-1.0) ** m), tol, max_terms, kernel=hh)
            record("kernel-h-alternating", S)
    if not candidates:
        raise NotConverged("no renewal variant could be computed")
    best = min(residuals, key=residuals.get)
    return RenewalResult(
        f=candidates[best],
        derivative=derivs[best],
        variant=best,
        residual=residuals[best],
        residuals=residuals,
        candidates=candidates,
    )


# =============================================================================
# log-convexity
# =============================================================================
def check_log_convexity(x, values, slack: float = 1e-9) -> bool:
    """Whether ``log values`` is convex in ``x`` by second divided differences.

    Parameters
    ----------
    x : array_like
        Increasing sample points (any spacing).
    values : array_like
        Positive tail values ``nu_bar(x)``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.size < 3:
        return True
    if np.any(v <= 0):
        raise ValueError("values must be positive")
    lv = np.log(v)
    slopes = np.diff(lv) / np.diff(x)
    jumps = np.diff(slopes)
    scale = np.maximum(1.0, np.maximum(np.abs(slopes[1:]), np.abs(slopes[:-1])))
    return bool(np.all(jumps >= -slack * scale))
