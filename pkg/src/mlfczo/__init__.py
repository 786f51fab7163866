"""Discrete experiments for multilinear fractional Calderón–Zygmund operators
with Dini-type kernel moduli.

Functions live on uniform power-of-two grids over a cube.  The submodules are
``grid`` (boxes, cubes, grid functions, norms), ``kernelcore`` (moduli, Dini
integrals, kernels), ``operators`` (the operator and the maximal functions),
``czdecomp`` (dyadic Calderón–Zygmund decomposition), ``weights``
(Muckenhoupt-type constants), ``varexp`` (variable exponent norms),
``harness`` (inequality checks) and ``cli``.
"""

from .grid import Box, Cube, Grid, GridFunction, integrate, lp_norm, weak_lq_norm
from .kernelcore import Kernel, Modulus, dini_integral, kernel_from_dict, riesz_kernel
from .operators import apply_T, multilinear_frac_maximal

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Cube",
    "Grid",
    "GridFunction",
    "Kernel",
    "Modulus",
    "apply_T",
    "dini_integral",
    "integrate",
    "kernel_from_dict",
    "lp_norm",
    "multilinear_frac_maximal",
    "riesz_kernel",
    "weak_lq_norm",
]
