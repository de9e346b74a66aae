"""Scale functions of a spectrally negative stable process.

For the zero-mean stable process with psi(beta) = beta**alpha the q-scale
function is x**(alpha - 1) E_{alpha, alpha}(q x**alpha), a Mittag-Leffler
function.  We compute it with the convolution series on a uniform grid, once
directly and once through the exponential tilt, and compare with the closed
form.  The Laplace identity L[W](beta) (psi(beta) - q) = 1 serves as an
independent check that needs no closed form at all.

Run with ``python demos/stable_scale_function.py``.
"""

import numpy as np

from qscale import Grid, LevyModel, Stable, scale_function, scale_stable_closed_form, tilt, verify_scale

alpha, q = 1.5, 1.0
model = LevyModel(0.0, "c_double_prime", 0.0, Stable(alpha))
grid = Grid.from_xmax(3.0, 1 / 1024)
x = grid.nodes
exact = scale_stable_closed_form(alpha, q, x)

series = scale_function(model, q, grid)
tilted = tilt(model, q, grid)

print(f"series route ({series.method}, {series.report.terms_used} terms)")
print(f"  max relative error on [0.1, 3]: {np.max(np.abs(series.values / exact - 1)[x >= 0.1]):.2e}")
print("tilt route")
print(f"  max relative error on [0.1, 3]: {np.max(np.abs(tilted.values / exact - 1)[x >= 0.1]):.2e}")

check = verify_scale(model, q, series)
print(f"Laplace identity: max residual {check.max_residual:.2e} over beta in "
      f"[{check.betas[0]:.2f}, {check.betas[-1]:.2f}] -> {'PASS' if check.passed else 'FAIL'}")

for xv in (0.25, 0.5, 1.0, 2.0):
    print(f"  W({xv}) = {float(series(xv)):.7f}   closed form {float(scale_stable_closed_form(alpha, q, xv)):.7f}")
