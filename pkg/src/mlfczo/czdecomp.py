"""Dyadic Calderón–Zygmund decomposition ``f = g + sum_k b_k`` at a height.

The box plays the role of ``R^n``: the decomposition requires the average of
``|f|`` over the whole box to be at most the height, and then descends the
dyadic tree, stopping at the first cube whose average exceeds the height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _cubes
from .grid import Cube, GridFunction, _fsum, average_on_cube, lp_norm

__all__ = [
    "BadPiece",
    "CZDecomposition",
    "CZReport",
    "cz_decompose",
    "reconstruct",
    "verify_cz_properties",
    "cz_height",
]

P6_EXPONENTS = (1.0, 2.0, 4.0, math.inf)


@dataclass(frozen=True, eq=False)
class BadPiece:
    cube: Cube
    piece: GridFunction
    """``(f - f_Q) * chi_Q``."""


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    f: GridFunction
    height: float
    g: GridFunction
    pieces: tuple[BadPiece, ...]
    total_measure: float

    @property
    def cubes(self) -> list[Cube]:
        return [p.cube for p in self.pieces]

    def to_dict(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "cubes": [{"corner": list(p.cube.corner), "side": p.cube.side} for p in self.pieces],
            "total_measure": self.total_measure,
        }


def cz_height(m: int, n: int, alpha: float, lam: float, gamma: float) -> float:
    """The decomposition height ``(lambda * gamma)^(n / (mn - alpha))``."""
    if not (lam > 0 and gamma > 0):
        raise ValueError("lambda and gamma must be positive")
    if not 0 < alpha < m * n:
        raise ValueError(f"alpha must lie in (0, {m * n}), got {alpha}")
    return (lam * gamma) ** (n / (m * n - alpha))


def _selected_cubes(a: np.ndarray, height: float) -> list[tuple[tuple[int, ...], int]]:
    """Stopping-time selection on the dyadic tree of ``a = |f|``.

    Level by level: a cube is a candidate when every ancestor has average at
    most ``height``; a candidate whose own average exceeds ``height`` is
    selected and its subtree is cut.
    """
    N, n = a.shape[0], a.ndim
    alive = np.ones((1,) * n, dtype=bool)
    found: list[tuple[tuple[int, ...], int]] = []
    s = N // 2
    while s >= 1:
        cand = alive
        for axis in range(n):
            cand = np.repeat(cand, 2, axis=axis)
        means = _cubes.window_means(a, s, "dyadic")
        sel = cand & (means > height)
        for idx in np.argwhere(sel):
            found.append((tuple(int(i) * s for i in idx), s))
        alive = cand & ~sel
        if not alive.any():
            break
        s //= 2
    found.sort(key=lambda cs: (cs[0], cs[1]))
    return found


def cz_decompose(f: GridFunction, height: float) -> CZDecomposition:
    """Calderón–Zygmund decomposition of ``f`` at ``height``.

    Parameters
    ----------
    f : GridFunction
    height : float
        Must be positive and at least the average of ``|f|`` over the box.

    Returns
    -------
    CZDecomposition
        ``g = f`` off the selected cubes and ``g = f_Q`` (signed average) on
        each selected ``Q``; ``b_k = (f - f_Q) chi_{Q_k}``.
    """
    if not (height > 0 and math.isfinite(height)):
        raise ValueError(f"height must be positive and finite, got {height}")
    a = np.abs(f.values)
    box_avg = _fsum(a) / a.size
    if box_avg > height:
        raise ValueError(
            f"height {height} is below the box average {box_avg} of |f|; "
            "the height is too small for this finite domain"
        )
    grid = f.grid
    g = np.array(f.values)
    pieces = []
    for corner, side in _selected_cubes(a, height):
        Q = Cube(grid, corner, side)
        fQ = average_on_cube(f, Q)
        b = np.zeros(grid.shape)
        b[Q.slices] = f.values[Q.slices] - fQ
        g[Q.slices] = fQ
        pieces.append(BadPiece(Q, GridFunction(grid, b)))
    total = math.fsum(p.cube.measure for p in pieces)
    return CZDecomposition(f, float(height), GridFunction(grid, g), tuple(pieces), total)


def reconstruct(d: CZDecomposition) -> GridFunction:
    """``g + sum_k b_k``."""
    v = np.array(d.g.values)
    for p in d.pieces:
        v[p.cube.slices] += p.piece.values[p.cube.slices]
    return d.g.with_values(v)


@dataclass(frozen=True)
class CZReport:
    """Empirical constants of the decomposition properties.

    ``p3`` is ``max_k int|b_k| / (height |Q_k|)``, ``p4`` is
    ``height * sum_k |Q_k| / ||f||_1``, ``p5`` is ``||b||_1 / ||f||_1`` and
    ``p6[s]`` is ``||g||_s / (height^(1/s') ||f||_1^(1/s))``.
    """

    n: int
    support_ok: bool
    mean_zero_max: float
    mean_zero_ok: bool
    p3: float
    p4: float
    p5: float
    p6: dict[float, float] = field(default_factory=dict)
    g_sup_ratio: float = 0.0
    maximal_ok: bool = True
    disjoint_ok: bool = True
    reconstruction_error: float = 0.0

    @property
    def passed(self) -> bool:
        return (
            self.support_ok
            and self.mean_zero_ok
            and self.maximal_ok
            and self.disjoint_ok
            and self.p3 <= 2.0 ** (self.n + 1)
            and self.p4 <= 1.0 + 1e-12
            and self.g_sup_ratio <= 2.0**self.n * (1 + 1e-12)
            and all(c <= 2.0**self.n * (1 + 1e-12) for c in self.p6.values())
            and self.reconstruction_error <= 1e-12
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "support_ok": self.support_ok,
            "mean_zero_max": self.mean_zero_max,
            "mean_zero_ok": self.mean_zero_ok,
            "p3": self.p3,
            "p4": self.p4,
            "p5": self.p5,
            "p6": {("inf" if math.isinf(s) else str(s)): c for s, c in self.p6.items()},
            "g_sup_ratio": self.g_sup_ratio,
            "maximal_ok": self.maximal_ok,
            "disjoint_ok": self.disjoint_ok,
            "reconstruction_error": self.reconstruction_error,
            "passed": self.passed,
        }


def verify_cz_properties(
    d: CZDecomposition, exponent_params: tuple[int, int, float, float, float] | None = None
) -> CZReport:
    """Check the decomposition properties by recomputing both sides.

    ``exponent_params = (m, n, alpha, lam, gamma)`` must reproduce the height
    the decomposition was built at (relative tolerance ``1e-12``).
    """
    grid = d.f.grid
    n, h = grid.n, grid.h
    if exponent_params is not None:
        m, n_p, alpha, lam, gamma = exponent_params
        if n_p != n:
            raise ValueError(f"dimension {n_p} does not match the grid dimension {n}")
        expected = cz_height(m, n, alpha, lam, gamma)
        if not math.isclose(expected, d.height, rel_tol=1e-12):
            raise ValueError(f"decomposition height {d.height} does not match {expected}")
    f1 = lp_norm(d.f, 1)
    vol = grid.cell_volume

    support_ok = True
    mean_max = 0.0
    p3 = 0.0
    maximal_ok = True
    cover = np.zeros(grid.shape, dtype=np.int64)
    b_total = np.zeros(grid.shape)
    for p in d.pieces:
        Q = p.cube
        mask = Q.mask()
        cover[mask] += 1
        if np.any(p.piece.values[~mask] != 0):
            support_ok = False
        mean_max = max(mean_max, abs(vol * _fsum(p.piece.values[Q.slices])))
        p3 = max(p3, vol * _fsum(np.abs(p.piece.values)) / (d.height * Q.measure))
        b_total += p.piece.values
        avg = average_on_cube(d.f.abs(), Q)
        if not d.height < avg:
            maximal_ok = False
        if Q.side < grid.N:
            ps = 2 * Q.side
            parent = Cube(grid, tuple((c // ps) * ps for c in Q.corner), ps)
            if average_on_cube(d.f.abs(), parent) > d.height:
                maximal_ok = False
    disjoint_ok = bool(np.all(cover <= 1))
    mean_ok = mean_max <= 1e-10 * max(f1, np.finfo(float).tiny)
    p4 = d.height * d.total_measure / f1 if f1 > 0 else 0.0
    p5 = vol * _fsum(np.abs(b_total)) / f1 if f1 > 0 else 0.0
    p6 = {}
    for s in P6_EXPONENTS:
        g_s = lp_norm(d.g, s)
        if f1 == 0:
            p6[s] = 0.0
            continue
        inv_s = 0.0 if math.isinf(s) else 1.0 / s
        denom = d.height ** (1.0 - inv_s) * f1**inv_s
        p6[s] = g_s / denom
    g_sup = float(np.max(np.abs(d.g.values), initial=0.0)) / d.height
    err = float(np.max(np.abs(reconstruct(d).values - d.f.values), initial=0.0))
    return CZReport(
        n=n,
        support_ok=support_ok,
        mean_zero_max=mean_max,
        mean_zero_ok=bool(mean_ok),
        p3=p3,
        p4=p4,
        p5=p5,
        p6=p6,
        g_sup_ratio=g_sup,
        maximal_ok=maximal_ok,
        disjoint_ok=disjoint_ok,
        reconstruction_error=err,
    )
