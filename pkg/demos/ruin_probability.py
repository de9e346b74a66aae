"""Ruin probabilities in the Cramer-Lundberg model.

An insurer collects premiums at rate c' = 2 and pays claims that arrive at
rate 1 with exponential sizes of mean 1.  The ruin probability from initial
capital x is 1 - psi'(0+) W(x), where W is the 0-scale function.  For
exponential claims the Pollaczek-Khinchine formula gives 0.5 exp(-x/2).

The second half replaces exponential claims by claims of size 1 or 2 with
equal probability, a case without an elementary closed form.

Run with ``python demos/ruin_probability.py``.
"""

import numpy as np

from qscale import CompoundPoisson, ExponentialLaw, Grid, LevyModel, MixedDistribution, ruin_probability, scale_function

grid = Grid.from_xmax(10.0, 1 / 1024)
xs = np.array([0.0, 1.0, 2.0, 5.0, 10.0 - grid.step])

model = LevyModel(2.0, "c_prime", 0.0, CompoundPoisson(1.0, ExponentialLaw(1.0)))
table = scale_function(model, 0.0, grid)
print("exponential claims")
for x, r in zip(xs, ruin_probability(model, xs, table=table)):
    print(f"  x = {x:5.2f}   ruin {r:.7f}   closed form {0.5 * np.exp(-0.5 * x):.7f}")

atoms = MixedDistribution([(1.0, 0.5), (2.0, 0.5)])
model = LevyModel(2.0, "c_prime", 0.0, CompoundPoisson(1.0, atoms))
table = scale_function(model, 0.0, grid)
print("claims of size 1 or 2 (mean 1.5, safety loading 1/3)")
for x, r in zip(xs, ruin_probability(model, xs, table=table)):
    print(f"  x = {x:5.2f}   ruin {r:.7f}")
