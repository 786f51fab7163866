"""Calderón-Zygmund decomposition of a spiky function at a few heights.

Higher heights select cubes of smaller total measure.  The good part stays below
2^n times the height and every bad piece has zero mean.
"""

import numpy as np

from mlfczo.czdecomp import cz_decompose, verify_cz_properties
from mlfczo.grid import Grid, GridFunction, lp_norm

g = Grid.make(1, 0.0, 1.0, 1024)
rng = np.random.default_rng(0)
v = rng.exponential(size=1024) ** 3 * (rng.random(1024) < 0.1)
f = GridFunction(g, v)
f = f / lp_norm(f, 1)

for height in (1.5, 4.0, 16.0, 64.0):
    d = cz_decompose(f, height)
    r = verify_cz_properties(d)
    print(f"height {height:5.1f}: {len(d.pieces):3d} cubes  "
          f"sup g / height {r.g_sup_ratio:.3f}  max |mean b_k| {r.mean_zero_max:.1e}  "
          f"height*sum|Q_k| / ||f||_1 {r.p4:.3f}  passed {r.passed}")
