"""Variable exponents: modulars, Luxemburg norms, conjugates and Hölder checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .grid import Grid, GridFunction, _check_same_grid, _fsum

__all__ = [
    "ExponentFunction",
    "constant_exponent",
    "exponent_from_dict",
    "modular",
    "luxemburg_norm",
    "conjugate",
    "log_holder_constants",
    "harmonic_exponent_sum",
    "check_generalized_holder",
    "check_multi_holder",
]

LUX_RTOL = 1e-10
LUX_MAXITER = 200
# pairs farther apart than this are left to the decay condition
LOCAL_RADIUS = 0.5
HOLDER_BOUND = 2.0


@dataclass(frozen=True, eq=False)
class ExponentFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)
    descriptor: dict | None = None

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("exponent values must be finite")
        if not np.min(v) > 0:
            raise ValueError("exponents must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def q_minus(self) -> float:
        return float(np.min(self.values))

    @property
    def q_plus(self) -> float:
        return float(np.max(self.values))

    @property
    def in_class_P(self) -> bool:
        """``1 < q_- <= q_+ < inf``."""
        return self.q_minus > 1

    @property
    def in_class_P0(self) -> bool:
        return self.q_minus > 0

    def to_dict(self) -> dict[str, Any]:
        d = dict(self.descriptor) if self.descriptor else {"type": "array"}
        d.update(q_minus=self.q_minus, q_plus=self.q_plus)
        return d


def constant_exponent(q0: float, grid: Grid) -> ExponentFunction:
    return ExponentFunction(grid, np.full(grid.shape, float(q0)), {"type": "constant", "q": float(q0)})


def exponent_from_dict(d: dict[str, Any], grid: Grid) -> ExponentFunction:
    """Catalog exponents.

    ``constant``: ``q``.  ``bump``: ``base + amp * exp(-|x - center|^2 / width^2)``.
    ``ramp``: ``base + amp * min(1, |x| / radius)`` (Lipschitz).
    ``jump``: ``base + amp * [x_1 > at]``.
    """
    kind = d["type"]
    c = grid.centers()
    if kind == "constant":
        return constant_exponent(float(d["q"]), grid)
    base, amp = float(d.get("base", 2.0)), float(d.get("amp", 0.5))
    if kind == "bump":
        center = np.broadcast_to(np.asarray(d.get("center", 0.0), dtype=float), (grid.n,))
        width = float(d.get("width", 0.5))
        r2 = np.sum((c - center) ** 2, axis=-1)
        v = base + amp * np.exp(-r2 / width**2)
    elif kind == "ramp":
        radius = float(d.get("radius", 1.0))
        v = base + amp * np.minimum(1.0, np.linalg.norm(c, axis=-1) / radius)
    elif kind == "jump":
        v = base + amp * (c[..., 0] > float(d.get("at", 0.0)))
    else:
        raise ValueError(f"unknown exponent type {kind!r}")
    return ExponentFunction(grid, v, dict(d))


def _same_grid(f: GridFunction, q: ExponentFunction) -> None:
    if f.grid != q.grid:
        raise ValueError("function and exponent live on different grids")


def modular(f: GridFunction, q: ExponentFunction) -> float:
    """``int |f|^q(x) dx``."""
    _same_grid(f, q)
    return f.grid.cell_volume * _fsum(np.abs(f.values) ** q.values)


def luxemburg_norm(f: GridFunction, q: ExponentFunction) -> float:
    """``inf {eta > 0 : modular(f / eta) <= 1}``.

    The modular of ``f / eta`` is continuous and strictly decreasing in
    ``eta`` on the support of ``f``; the root is bracketed by doubling and then
    refined in ``log(eta)`` to relative tolerance ``1e-10``.
    """
    _same_grid(f, q)
    a = np.abs(f.values)
    keep = a > 0
    if not np.any(keep):
        return 0.0
    a, e = a[keep], q.values[keep]
    vol = f.grid.cell_volume

    def excess(log_eta: float) -> float:
        return vol * _fsum((a / math.exp(log_eta)) ** e) - 1.0

    lo = hi = math.log(float(np.max(a)))
    while excess(hi) > 0:
        hi += math.log(2.0)
    while excess(lo) <= 0:
        lo -= math.log(2.0)
    if excess(hi) == 0:
        return math.exp(hi)
    root = brentq(excess, lo, hi, xtol=LUX_RTOL * 1e-2, rtol=4 * np.finfo(float).eps, maxiter=LUX_MAXITER)
    return math.exp(root)


def conjugate(q: ExponentFunction) -> ExponentFunction:
    """Cellwise ``q' = q / (q - 1)``."""
    if not q.in_class_P:
        raise ValueError(f"conjugate needs q_- > 1, got {q.q_minus}")
    return ExponentFunction(q.grid, q.values / (q.values - 1.0))


class LogHolder(NamedTuple):
    C_loc: float
    C_inf: float
    q_inf: float
    q_inf_radius: float
    """Mean radius of the boundary cells that define ``q_inf``."""


def _boundary_mask(shape: tuple[int, ...]) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    for axis in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[axis] = 0
        m[tuple(idx)] = True
        idx[axis] = -1
        m[tuple(idx)] = True
    return m


def log_holder_constants(q: ExponentFunction) -> LogHolder:
    """Empirical log-Hölder constants on the grid.

    ``C_loc = max |q(x) - q(y)| * (-ln|x - y|)`` over cell pairs with
    ``0 < |x - y| <= 1/2``; ``q_inf`` is the average over the boundary cells;
    ``C_inf = max |q(x) - q_inf| * ln(e + |x|)``.
    """
    grid, v = q.grid, q.values
    N, n, h = grid.N, grid.n, grid.h
    kmax = min(N - 1, int(math.floor(LOCAL_RADIUS / h + 1e-9)))
    c_loc = 0.0
    for d in np.ndindex(*((2 * kmax + 1,) * n)):
        d = tuple(k - kmax for k in d)
        nz = [k for k in d if k != 0]
        # each unordered pair once: first nonzero component positive
        if not nz or nz[0] < 0:
            continue
        dist = h * math.sqrt(sum(k * k for k in d))
        if dist > LOCAL_RADIUS:
            continue
        src = tuple(slice(max(0, -k), N - max(0, k)) for k in d)
        dst = tuple(slice(max(0, k), N - max(0, -k)) for k in d)
        diff = np.abs(v[dst] - v[src])
        if diff.size:
            c_loc = max(c_loc, float(diff.max()) * -math.log(dist))
    bmask = _boundary_mask(grid.shape)
    q_inf = float(np.mean(v[bmask]))
    r = grid.radius()
    c_inf = float(np.max(np.abs(v - q_inf) * np.log(math.e + r)))
    return LogHolder(c_loc, c_inf, q_inf, float(np.mean(r[bmask])))


def harmonic_exponent_sum(qs: Sequence[ExponentFunction]) -> ExponentFunction:
    """Cellwise ``1/p = sum_j 1/q_j``.  Leaving the class ``P`` is not clamped;
    check :attr:`ExponentFunction.in_class_P` on the result."""
    if not qs:
        raise ValueError("need at least one exponent")
    grid = qs[0].grid
    for q in qs[1:]:
        if q.grid != grid:
            raise ValueError("exponents live on different grids")
    inv = np.zeros(grid.shape)
    for q in qs:
        inv = inv + 1.0 / q.values
    return ExponentFunction(grid, 1.0 / inv)


class HolderCheck(NamedTuple):
    lhs: float
    rhs: float
    ratio: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.ratio <= self.bound


def check_generalized_holder(f: GridFunction, g: GridFunction, p: ExponentFunction) -> HolderCheck:
    """``int |fg|`` against ``||f||_p(.) ||g||_p'(.)``."""
    _check_same_grid(f, g)
    lhs = f.grid.cell_volume * _fsum(np.abs(f.values * g.values))
    rhs = luxemburg_norm(f, p) * luxemburg_norm(g, conjugate(p))
    ratio = 0.0 if lhs == 0 else lhs / rhs
    return HolderCheck(lhs, rhs, ratio, HOLDER_BOUND)


def check_multi_holder(
    fs: Sequence[GridFunction], qs: Sequence[ExponentFunction], q: ExponentFunction
) -> HolderCheck:
    """``||f_1 ... f_m||_q(.)`` against ``prod_j ||f_j||_q_j(.)`` when
    ``1/q = sum_j 1/q_j`` cellwise; the bound reported is ``2^(m-1)``."""
    if len(fs) != len(qs):
        raise ValueError(f"{len(fs)} functions but {len(qs)} exponents")
    grid = _check_same_grid(*fs)
    inv = sum(1.0 / qj.values for qj in qs)
    mismatch = float(np.max(np.abs(inv - 1.0 / q.values)))
    if mismatch > 1e-10:
        raise ValueError(f"1/q differs from sum 1/q_j by {mismatch:.3g}")
    prod = np.ones(grid.shape)
    for f in fs:
        prod = prod * f.values
    lhs = luxemburg_norm(GridFunction(grid, prod), q)
    rhs = math.prod(luxemburg_norm(f, qj) for f, qj in zip(fs, qs))
    ratio = 0.0 if lhs == 0 else lhs / rhs
    return HolderCheck(lhs, rhs, ratio, 2.0 ** (len(fs) - 1))
