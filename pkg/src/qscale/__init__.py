"""Scale functions of spectrally negative Levy processes by convolution series.

The package tabulates the q-scale function ``W^(q)`` of a spectrally negative
Levy process on a uniform midpoint grid.  It sums convolution power series
with product integration for weakly singular factors, and checks the result
against the defining Laplace identity.

Modules
-------
grid, calculus
    Grid functions with declared origin singularities and their calculus.
levy
    Levy triplets, Laplace exponents and jump-measure families.
series
    Truncated convolution power series.
scale
    Scale functions by regime, closed forms, tilting and perturbation.
resolvent
    Resolvents of the first kind and the renewal equation.
verify
    Laplace identity check, ruin probabilities and brute-force oracles.
"""

from .calculus import (
    convolve,
    convolve_mixed,
    derivative,
    frac_derivative,
    frac_integral,
    l1_norm,
    primitive,
    shift,
    sup_norm,
)
from .distributions import (
    ExponentialLaw,
    MixedDistribution,
    dirac,
    geometric,
    negative_binomial_mass,
    zero_truncated_poisson,
)
from .errors import *  # noqa: F401,F403
from .errors import __all__ as _error_names
from .grid import Grid, GridFunction
from .levy import (
    CombinedJumps,
    CompoundPoisson,
    Custom,
    DriftConvention,
    LevyModel,
    NoJumps,
    Regime,
    Stable,
    TabulatedTail,
    TemperedStable,
    classify,
    truncate_measure,
)
from .resolvent import (
    check_log_convexity,
    resolvent_via_compensated,
    solve_renewal,
    solve_resolvent,
)
from .scale import (
    Compensated,
    ExplicitH,
    PowerKernel,
    ResolventKernel,
    ScaleTable,
    mittag_leffler,
    mittag_leffler_derivative,
    scale_bounded_variation,
    scale_brownian_closed_form,
    scale_function,
    scale_gaussian,
    scale_gaussian_roots,
    scale_stable_closed_form,
    scale_unbounded_variation,
    scale_with_cpp_perturbation,
    tilt,
    ztp_mass,
)
from .series import SeriesSpec, convolution_series
from .verify import (
    brute_force_convolution_pmf,
    kappa_classifier,
    laplace_transform,
    ruin_probability,
    verify_scale,
)

__version__ = "0.1.0"

__all__ = [
    "Grid", "GridFunction",
    "convolve", "convolve_mixed", "shift", "primitive", "derivative",
    "frac_integral", "frac_derivative", "l1_norm", "sup_norm",
    "MixedDistribution", "ExponentialLaw", "dirac", "geometric",
    "zero_truncated_poisson", "negative_binomial_mass",
    "LevyModel", "DriftConvention", "Regime", "NoJumps", "Stable", "TemperedStable",
    "CompoundPoisson", "TabulatedTail", "Custom", "CombinedJumps", "classify",
    "truncate_measure",
    "SeriesSpec", "convolution_series",
    "ScaleTable", "PowerKernel", "ExplicitH", "ResolventKernel", "Compensated",
    "scale_function", "scale_gaussian", "scale_gaussian_roots", "scale_bounded_variation",
    "scale_unbounded_variation", "tilt", "scale_with_cpp_perturbation", "ztp_mass",
    "scale_brownian_closed_form", "scale_stable_closed_form",
    "mittag_leffler", "mittag_leffler_derivative",
    "solve_resolvent", "resolvent_via_compensated", "solve_renewal", "check_log_convexity",
    "verify_scale", "laplace_transform", "ruin_probability", "kappa_classifier",
    "brute_force_convolution_pmf",
] + list(_error_names)
