"""Renewal equation f = 1 + g * f' with an Abel kernel.

For g(x) = sqrt(pi) x**(-1/2) the resolvent is rho(x) = x**(-1/2) / pi and
the solution with f(0+) = 0 is f(x) = 1 - E_{1/2}(sqrt(x) / pi).  The solver
computes four series variants and keeps the one with the smallest residual
of the equation.  The two alternating-sign variants solve f = -1 - g * f'
instead, which the residuals make obvious.

Run with ``python demos/renewal_variants.py``.
"""

import math

import numpy as np

from qscale import Grid, GridFunction, mittag_leffler, solve_renewal

grid = Grid.from_xmax(5.0, 1 / 512)
g = GridFunction.power(grid, -0.5, math.sqrt(math.pi))
result = solve_renewal(g)

print("residual max |f - 1 - g * f'| on [5h, 5] per variant")
for name, value in sorted(result.residuals.items(), key=lambda kv: kv[1]):
    print(f"  {name:24s} {value:.3e}")
print(f"selected: {result.variant}")

x = grid.nodes
reference = 1 - mittag_leffler(0.5, np.sqrt(x) / math.pi)
print(f"max |f - (1 - E_1/2(sqrt(x)/pi))| = {np.max(np.abs(result.f.samples - reference)):.2e}")
