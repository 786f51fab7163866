"""Uniform cell-centered grids, cubes, midpoint quadrature and unweighted norms.

A :class:`Grid` discretizes the half-open box ``[lo, lo + L)^n`` into ``N``
cells per side (``N`` a power of two, so the dyadic mesh is exactly
representable).  A :class:`GridFunction` holds one sample per cell, taken
at the cell center, and is treated as compactly supported inside the box.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "Box",
    "Grid",
    "Cube",
    "GridFunction",
    "integrate",
    "average_on_cube",
    "cube_family",
    "lp_norm",
    "weak_lq_norm",
]


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class Box:
    """The half-open cube ``[lo, lo + L)^n``."""

    n: int
    lo: tuple[float, ...]
    L: float

    def __post_init__(self) -> None:
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        if len(lo) != self.n:
            raise ValueError(f"lower corner has {len(lo)} entries, expected {self.n}")
        object.__setattr__(self, "lo", lo)
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"side length must be positive, got {self.L}")

    def contains(self, x: Sequence[float]) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lo)
        return bool(np.all(x >= lo) and np.all(x < lo + self.L))


@dataclass(frozen=True)
class Grid:
    box: Box
    N: int

    def __post_init__(self) -> None:
        if not _is_power_of_two(int(self.N)):
            raise ValueError(f"cells per side must be a power of two, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def make(cls, n: int, lo: float | Sequence[float], L: float, N: int) -> "Grid":
        if np.isscalar(lo):
            lo = (float(lo),) * n
        return cls(Box(n, tuple(lo), float(L)), N)

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def h(self) -> float:
        return self.box.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def axis_centers(self, axis: int = 0) -> np.ndarray:
        return self.box.lo[axis] + (np.arange(self.N) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """Cell centers, shape ``grid.shape + (n,)``."""
        axes = [self.axis_centers(k) for k in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def radius(self) -> np.ndarray:
        """Euclidean distance of each cell center to the origin."""
        return np.linalg.norm(self.centers(), axis=-1)

    def cell_of(self, x: Sequence[float]) -> tuple[int, ...]:
        if not self.box.contains(x):
            raise ValueError(f"point {tuple(np.atleast_1d(x))} is outside the box")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.floor((x - np.asarray(self.box.lo)) / self.h).astype(int)
        return tuple(int(min(i, self.N - 1)) for i in idx)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.box, self.N * factor)

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def sample(self, fn) -> "GridFunction":
        """Sample ``fn`` (taking ``n`` coordinate arrays) at the cell centers."""
        c = self.centers()
        return GridFunction(self, fn(*[c[..., k] for k in range(self.n)]))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.shape))

    def indicator(self, lo: Sequence[float] | float, hi: Sequence[float] | float) -> "GridFunction":
        """Indicator of the product of intervals ``[lo_k, hi_k)`` sampled at centers."""
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.n,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.n,))
        c = self.centers()
        mask = np.all((c >= lo) & (c < hi), axis=-1)
        return GridFunction(self, mask.astype(float))


@dataclass(frozen=True)
class Cube:
    """A grid-aligned cube given by its lower corner cell index and side in cells."""

    grid: Grid
    corner: tuple[int, ...]
    side: int

    def __post_init__(self) -> None:
        corner = tuple(int(c) for c in np.atleast_1d(self.corner))
        object.__setattr__(self, "corner", corner)
        if len(corner) != self.grid.n:
            raise ValueError("corner index has the wrong dimension")
        if self.side < 1:
            raise ValueError("cube side must be at least one cell")
        if any(c < 0 or c + self.side > self.grid.N for c in corner):
            raise ValueError(f"cube {corner}+{self.side} lies outside the grid")

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(c, c + self.side) for c in self.corner)

    @property
    def length(self) -> float:
        """Side length l(Q)."""
        return self.side * self.grid.h

    @property
    def measure(self) -> float:
        return self.length**self.grid.n

    @property
    def center(self) -> np.ndarray:
        lo = np.asarray(self.grid.box.lo)
        return lo + (np.asarray(self.corner) + 0.5 * self.side) * self.grid.h

    def contains_cell(self, idx: Sequence[int]) -> bool:
        return all(c <= i < c + self.side for c, i in zip(self.corner, idx))

    def mask(self) -> np.ndarray:
        m = np.zeros(self.grid.shape, dtype=bool)
        m[self.slices] = True
        return m

    def is_dyadic(self) -> bool:
        return _is_power_of_two(self.side) and all(c % self.side == 0 for c in self.corner)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            if v.size != self.grid.size:
                raise ValueError(f"expected {self.grid.size} values, got {v.size}")
            v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def abs(self) -> "GridFunction":
        return self.with_values(np.abs(self.values))

    def shift(self, cells: Sequence[int] | int) -> "GridFunction":
        """Translate by whole cells, filling with zeros (no wrap-around)."""
        cells = np.broadcast_to(np.asarray(cells, dtype=int), (self.grid.n,))
        out = np.zeros(self.grid.shape)
        src, dst = [], []
        for d in cells:
            d = int(d)
            if abs(d) >= self.grid.N:
                return self.with_values(out)
            src.append(slice(max(0, -d), self.grid.N - max(0, d)))
            dst.append(slice(max(0, d), self.grid.N - max(0, -d)))
        out[tuple(dst)] = self.values[tuple(src)]
        return self.with_values(out)

    def restrict(self, cube: Cube) -> "GridFunction":
        """Zero outside ``cube``."""
        return self.with_values(np.where(cube.mask(), self.values, 0.0))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.with_values(self.values / c)

    def __neg__(self):
        return self.with_values(-self.values)


def _check_same_grid(*fs: GridFunction) -> Grid:
    grid = fs[0].grid
    for f in fs[1:]:
        if f.grid != grid:
            raise ValueError("grid functions live on different grids")
    return grid


def _fsum(a: np.ndarray) -> float:
    # Correctly rounded, hence independent of summation order (exact under shifts).
    return math.fsum(np.ravel(a).tolist())


def integrate(f: GridFunction) -> float:
    """Midpoint-rule integral ``h^n * sum(values)``."""
    return f.grid.cell_volume * _fsum(f.values)


def average_on_cube(f: GridFunction, Q: Cube) -> float:
    if Q.grid != f.grid:
        raise ValueError("cube and function live on different grids")
    block = f.values[Q.slices]
    return _fsum(block) / block.size


def cube_family(grid: Grid, x: Sequence[float], mode: str = "full") -> list[Cube]:
    """All grid-aligned cubes containing the point ``x``.

    ``mode="full"`` enumerates every side ``1..N`` and every admissible offset;
    ``mode="dyadic"`` keeps only the dyadic ancestors of the cell of ``x``.
    Sorted by side, then offset (lexicographic).
    """
    idx = grid.cell_of(x)
    N = grid.N
    cubes: list[Cube] = []
    if mode == "dyadic":
        s = 1
        while s <= N:
            cubes.append(Cube(grid, tuple((i // s) * s for i in idx), s))
            s *= 2
        return cubes
    if mode != "full":
        raise ValueError(f"unknown cube family mode {mode!r}")
    for s in range(1, N + 1):
        ranges = [range(max(0, i - s + 1), min(i, N - s) + 1) for i in idx]
        for corner in itertools.product(*ranges):
            cubes.append(Cube(grid, corner, s))
    return cubes


def iter_cubes(grid: Grid, mode: str = "full") -> Iterator[Cube]:
    """Every cube of the family (no point constraint)."""
    N = grid.N
    if mode == "dyadic":
        s = 1
        while s <= N:
            for corner in itertools.product(range(0, N, s), repeat=grid.n):
                yield Cube(grid, corner, s)
            s *= 2
    elif mode == "full":
        for s in range(1, N + 1):
            for corner in itertools.product(range(N - s + 1), repeat=grid.n):
                yield Cube(grid, corner, s)
    else:
        raise ValueError(f"unknown cube family mode {mode!r}")


def lp_norm(f: GridFunction, p: float) -> float:
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max(initial=0.0))
    return (f.grid.cell_volume * _fsum(a**p)) ** (1.0 / p)


def _weak_sup(a: np.ndarray, mass: np.ndarray, q: float) -> float:
    """sup over distinct values t of ``t * mass({a >= t})**(1/q)``."""
    a = np.ravel(a)
    mass = np.ravel(mass)
    keep = a > 0
    if not np.any(keep):
        return 0.0
    a, mass = a[keep], mass[keep]
    order = np.argsort(-a, kind="stable")
    a, mass = a[order], mass[order]
    cum = np.cumsum(mass)
    # last index of each run of equal values
    last = np.r_[a[1:] != a[:-1], True]
    t, m = a[last], cum[last]
    return float(np.max(t * m ** (1.0 / q)))


def weak_lq_norm(f: GridFunction, q: float) -> float:
    """Weak ``L^{q,inf}`` quasi-norm ``sup_t t |{|f| > t}|^{1/q}``."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    a = np.abs(f.values)
    return _weak_sup(a, np.full(a.shape, f.grid.cell_volume), q)
