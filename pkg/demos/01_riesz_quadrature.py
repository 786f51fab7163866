"""Riesz potential of an indicator, and how the quadrature converges.

The fractional integral of order 1/2 applied to the indicator of [0, 1]
equals 2 at the origin.  Each grid doubling should shrink the error by
about 1/sqrt(2), since the singularity sits at a cell boundary.
"""

from mlfczo import Grid, riesz_kernel
from mlfczo.operators import apply_T_at

K = riesz_kernel(1, 1, 0.5)
prev = None
for N in (64, 128, 256, 512, 1024):
    g = Grid.make(1, -1.0, 4.0, N)
    value = float(apply_T_at(K, [g.indicator(0.0, 1.0)], [0.0])[0])
    err = abs(value - 2.0)
    ratio = "" if prev is None else f"  ratio {err / prev:.3f}"
    print(f"N={N:5d}  I(chi)(0) = {value:.6f}  error {err:.2e}{ratio}")
    prev = err
