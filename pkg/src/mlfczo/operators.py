"""The fractional operator T_alpha and the maximal-function family on grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal

from . import _cubes
from .grid import Cube, Grid, GridFunction, _check_same_grid
from .kernelcore import Kernel

__all__ = [
    "ResourceCapError",
    "OperatorOutput",
    "KernelTable",
    "tabulate",
    "apply_T",
    "apply_T_batch",
    "apply_T_at",
    "hl_maximal",
    "m_delta",
    "sharp_maximal",
    "frac_maximal",
    "multilinear_frac_maximal",
    "multilinear_frac_maximal_r",
    "orlicz_llogl_average",
    "llogl_maximal",
    "multilinear_frac_maximal_llogl",
    "iterated_maximal",
    "default_sharp_delta",
]


class ResourceCapError(RuntimeError):
    """Requested computation exceeds a desk-scale resource cap."""


# cells per side allowed for apply_T, keyed by (m, n)
APPLY_CAPS = {(1, 1): 8192, (1, 2): 128, (2, 1): 512, (2, 2): 32}
DEFAULT_ORDER = 2


def _apply_cap(m: int, n: int) -> int:
    if (m, n) in APPLY_CAPS:
        return APPLY_CAPS[(m, n)]
    # keep N^{n(m+1)} around 2^27
    return 2 ** int(27 // (n * (m + 1)))


def check_apply_cap(m: int, grid: Grid, allow_large: bool = False) -> None:
    cap = _apply_cap(m, grid.n)
    if grid.N > cap and not allow_large:
        raise ResourceCapError(
            f"apply_T with m={m}, n={grid.n} is capped at N={cap} (got N={grid.N}); "
            "pass allow_large=True to override"
        )


@dataclass(frozen=True)
class OperatorOutput:
    result: GridFunction
    bias: float
    """Estimated size of the omitted diagonal contribution (``~ h^alpha``)."""


def _gauss_nodes(order: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre offsets within ``[-h/2, h/2]`` and weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * h * x, 0.5 * w


def _node_offsets(order: int, h: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    xi, w = _gauss_nodes(order, h)
    grids = np.meshgrid(*([xi] * n), indexing="ij")
    wgrids = np.meshgrid(*([w] * n), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return offs, weights


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Cell-integrated kernel weights indexed by cell differences ``i - k_j``.

    ``weights`` has shape ``((2N-1,)*n)*m``; entries where some difference
    vanishes (diagonal tuples) are zero.
    """

    kernel: Kernel
    grid: Grid
    order: int
    weights: np.ndarray
    omitted_mass: float


def tabulate(K: Kernel, grid: Grid, order: int = DEFAULT_ORDER, allow_large: bool = False) -> KernelTable:
    if not K.translation_invariant:
        raise ValueError("only translation-invariant kernels can be tabulated")
    if K.n != grid.n:
        raise ValueError(f"kernel dimension {K.n} does not match grid dimension {grid.n}")
    check_apply_cap(K.m, grid, allow_large)
    N, n, m, h = grid.N, grid.n, K.m, grid.h
    d1 = np.arange(-(N - 1), N)
    M = d1.size
    dvec = np.stack(np.meshgrid(*([d1] * n), indexing="ij"), axis=-1).reshape(-1, n) * h
    P = M**n
    offs, w = _node_offsets(order, h, n)
    diag = np.all(dvec == 0, axis=-1)

    def slot_shape(j: int, rows: int | None = None) -> tuple[int, ...]:
        shape = [1] * m
        shape[j] = P if rows is None else rows
        return tuple(shape) + (n,)

    W = np.zeros((P,) * m)
    omitted = 0.0
    # chunk over slot-0 rows to bound memory
    step = max(1, (1 << 22) // max(1, P ** (m - 1)))
    node_tuples = np.array(np.meshgrid(*([np.arange(len(w))] * m), indexing="ij")).reshape(m, -1).T
    for r0 in range(0, P, step):
        r1 = min(P, r0 + step)
        acc = np.zeros((r1 - r0,) + (P,) * (m - 1))
        for tup in node_tuples:
            ds = []
            for j, t in enumerate(tup):
                src = dvec[r0:r1] if j == 0 else dvec
                ds.append((src - offs[t]).reshape(slot_shape(j, r1 - r0 if j == 0 else None)))
            acc += np.prod(w[tup]) * K.profile(ds)
        W[r0:r1] = acc
    W *= K.scale * grid.cell_volume**m
    # zero the diagonal tuples, recording their quadrature mass
    mask = np.zeros(W.shape, dtype=bool)
    for j in range(m):
        idx = [slice(None)] * m
        idx[j] = diag
        mask[tuple(idx)] = True
    if order % 2 == 1:
        omitted = _omitted_mass_even(K, grid, mask, dvec, n, m, h)
    else:
        omitted = float(np.sum(np.abs(W[mask])))
    W[mask] = 0.0
    W = W.reshape(((M,) * n) * m)
    return KernelTable(K, grid, order, W, omitted)


def _omitted_mass_even(K, grid, mask, dvec, n, m, h) -> float:
    # odd orders put a node on the cell center; estimate the omitted mass with 2-point nodes
    offs, w = _node_offsets(2, h, n)
    total = 0.0
    idx = np.argwhere(mask)
    for chunk in np.array_split(idx, max(1, len(idx) // 200_000 + 1)):
        acc = np.zeros(len(chunk))
        node_tuples = np.array(np.meshgrid(*([np.arange(len(w))] * m), indexing="ij")).reshape(m, -1).T
        for tup in node_tuples:
            ds = [dvec[chunk[:, j]] - offs[t] for j, t in enumerate(tup)]
            acc += np.prod(w[tup]) * K.profile(ds)
        total += float(np.sum(np.abs(acc)))
    return total * K.scale * grid.cell_volume**m


def _table_apply(table: KernelTable, F: Sequence[np.ndarray]) -> np.ndarray:
    """Apply a tabulated kernel to a batch: ``F[j]`` has shape ``(C,) + grid.shape``."""
    grid = table.grid
    N, n, m = grid.N, grid.n, table.kernel.m
    C = F[0].shape[0]
    P = N**n
    W = table.weights
    if m == 1:
        out = np.empty((C,) + grid.shape)
        keep = tuple(slice(N - 1, 2 * N - 1) for _ in range(n))
        for c in range(C):
            full = signal.convolve(F[0][c], W, mode="full", method="direct")
            out[c] = full[keep]
        return out
    R = W[(slice(None, None, -1),) * (n * m)]
    flat = [f.reshape(C, P) for f in F]
    out = np.empty((C, P))
    for flat_i, i in enumerate(np.ndindex(*grid.shape)):
        sl = tuple(slice(N - 1 - ik, 2 * N - 1 - ik) for ik in i) * m
        G = R[sl].reshape((P,) * m)
        # contract the trailing slots one at a time, keeping the batch axis last
        Y = G @ flat[m - 1].T
        for j in range(m - 2, 0, -1):
            Y = np.einsum("...pc,cp->...c", Y, flat[j])
        out[:, flat_i] = np.einsum("pc,cp->c", Y, flat[0])
    return out.reshape((C,) + grid.shape)


def _fs_array(fs: Sequence[GridFunction], m: int) -> tuple[Grid, list[np.ndarray]]:
    if len(fs) != m:
        raise ValueError(f"kernel is {m}-linear but {len(fs)} functions were given")
    grid = _check_same_grid(*fs)
    return grid, [f.values for f in fs]


def _bias(table_or_none, K: Kernel, grid: Grid, fs_sup: float) -> float:
    if table_or_none is not None:
        return fs_sup * table_or_none.omitted_mass
    # own-cell bound for the size estimate, one slot at a time
    h = grid.h
    if grid.n == 1:
        kappa = 2 * 0.5**K.alpha / K.alpha
    else:
        kappa = 2 * math.pi * (1 / math.sqrt(2)) ** K.alpha / K.alpha
    return K.A * fs_sup * K.m * kappa * h**K.alpha


def apply_T(
    K: Kernel,
    fs: Sequence[GridFunction],
    order: int = DEFAULT_ORDER,
    table: KernelTable | None = None,
    allow_large: bool = False,
) -> OperatorOutput:
    """``T_alpha(f_1, ..., f_m)`` at every cell center.

    Each ``f_j`` is read as constant on its cells; the kernel is integrated
    over every source cell with ``order``-point Gauss-Legendre nodes per
    axis.  Source tuples in which some ``y_j`` cell is the output cell are
    omitted; their estimated contribution is returned as ``bias``.
    """
    grid, F = _fs_array(fs, K.m)
    sup = float(np.prod([np.max(np.abs(v), initial=0.0) for v in F]))
    if K.translation_invariant:
        if table is None:
            table = tabulate(K, grid, order, allow_large)
        elif table.grid != grid or table.kernel is not K:
            raise ValueError("kernel table was built for another kernel or grid")
        vals = _table_apply(table, [v[None] for v in F])[0]
        return OperatorOutput(GridFunction(grid, vals), _bias(table, K, grid, sup))
    check_apply_cap(K.m, grid, allow_large)
    vals = _direct_apply(K, grid, F, order)
    return OperatorOutput(GridFunction(grid, vals), _bias(None, K, grid, sup))


def apply_T_batch(
    K: Kernel,
    cases: Sequence[Sequence[GridFunction]],
    order: int = DEFAULT_ORDER,
    table: KernelTable | None = None,
    allow_large: bool = False,
) -> list[GridFunction]:
    """Apply ``T`` to many tuples on one grid, sharing the kernel table."""
    if not cases:
        return []
    grid = _check_same_grid(*[f for case in cases for f in case])
    if not K.translation_invariant:
        return [apply_T(K, c, order, allow_large=allow_large).result for c in cases]
    if table is None:
        table = tabulate(K, grid, order, allow_large)
    F = [np.stack([c[j].values for c in cases]) for j in range(K.m)]
    out = _table_apply(table, F)
    return [GridFunction(grid, v) for v in out]


def _source_nodes(grid: Grid, order: int):
    offs, w = _node_offsets(order, grid.h, grid.n)
    centers = grid.centers().reshape(-1, grid.n)
    pts = (centers[:, None, :] + offs[None]).reshape(-1, grid.n)
    wts = np.broadcast_to(w[None] * grid.cell_volume, (centers.shape[0], len(w))).reshape(-1)
    cell = np.repeat(np.arange(centers.shape[0]), len(w))
    return centers, pts, wts, cell


def _contract_at(K: Kernel, x: np.ndarray, pts, wts, vals: list[np.ndarray], drop: np.ndarray) -> float:
    """Sum ``K(x, y) prod f_j(y_j) w_j`` over node tuples, skipping dropped nodes."""
    m = K.m
    keep = ~drop
    p = pts[keep]
    coef = [(wts * v)[keep] for v in vals]
    shape_x = (1,) * m + (K.n,)
    ys = []
    for j in range(m):
        shape = [1] * m
        shape[j] = p.shape[0]
        ys.append(p.reshape(tuple(shape) + (K.n,)))
    Kv = K(x.reshape(shape_x), *ys)
    for j in range(m - 1, -1, -1):
        Kv = Kv @ coef[j] if Kv.ndim >= 1 else Kv
    return float(Kv)


def _direct_apply(K: Kernel, grid: Grid, F: list[np.ndarray], order: int) -> np.ndarray:
    centers, pts, wts, cell = _source_nodes(grid, order)
    vals = [np.repeat(v.reshape(-1), len(wts) // grid.size) for v in F]
    out = np.empty(grid.size)
    for i, x in enumerate(centers):
        out[i] = _contract_at(K, x, pts, wts, vals, cell == i)
    return out.reshape(grid.shape)


def apply_T_at(
    K: Kernel,
    fs: Sequence[GridFunction],
    points: np.ndarray | Sequence[float],
    order: int = DEFAULT_ORDER,
    allow_large: bool = False,
) -> np.ndarray:
    """``T_alpha(f)`` at arbitrary points (not necessarily cell centers).

    A source cell is omitted only when its center coincides with the point.
    """
    grid, F = _fs_array(fs, K.m)
    check_apply_cap(K.m, grid, allow_large)
    pts_x = np.asarray(points, dtype=float).reshape(-1, grid.n)
    centers, pts, wts, cell = _source_nodes(grid, order)
    rep = len(wts) // grid.size
    vals = [np.repeat(v.reshape(-1), rep) for v in F]
    out = np.empty(len(pts_x))
    for i, x in enumerate(pts_x):
        hit = np.all(np.abs(centers - x) <= 1e-9 * grid.h, axis=-1)
        out[i] = _contract_at(K, x, pts, wts, vals, hit[cell])
    return out


# ---------------------------------------------------------------- maximal functions


def hl_maximal(f: GridFunction, mode: str = "full") -> GridFunction:
    """Hardy-Littlewood maximal function over the grid cube family."""
    _cubes.check_mode(mode)
    a = np.abs(f.values)
    N, n = f.grid.N, f.grid.n
    out = _cubes.cube_sup(N, n, mode, _cubes.iter_window_means(a, mode))
    return f.with_values(out)


def m_delta(f: GridFunction, delta: float, mode: str = "full") -> GridFunction:
    """``M_delta f = M(|f|^delta)^(1/delta)``."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta == 1:
        return hl_maximal(f, mode)
    g = hl_maximal(f.with_values(np.abs(f.values) ** delta), mode)
    return g.with_values(g.values ** (1.0 / delta))


def _mean_oscillation(block: np.ndarray) -> np.ndarray:
    return np.mean(np.abs(block - block.mean(axis=-1, keepdims=True)), axis=-1)


def sharp_maximal(f: GridFunction, delta: float = 1.0, mode: str = "full") -> GridFunction:
    """Sharp maximal function in mean-oscillation form.

    ``delta == 1`` gives ``M# f``; ``delta < 1`` gives ``M#(|f|^delta)^(1/delta)``.
    """
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    _cubes.check_mode(mode)
    a = f.values if delta == 1 else np.abs(f.values) ** delta
    N, n = f.grid.N, f.grid.n
    stats = _cubes.per_scale(N, mode, lambda s: _cubes.window_stat(a, s, mode, _mean_oscillation))
    out = _cubes.cube_sup(N, n, mode, stats)
    if delta != 1:
        out = out ** (1.0 / delta)
    return f.with_values(out)


def frac_maximal(f: GridFunction, alpha: float, mode: str = "full") -> GridFunction:
    """``M_alpha f(x) = sup_Q |Q|^(alpha/n) avg_Q |f|`` for ``0 < alpha < n``."""
    n = f.grid.n
    if not 0 < alpha < n:
        raise ValueError(f"alpha must lie in (0, {n}), got {alpha}")
    return multilinear_frac_maximal([f], alpha, mode)


def _scale_factor(s: int, h: float, alpha: float) -> float:
    # |Q|^(alpha/n) = (s h)^alpha
    return (s * h) ** alpha if alpha else 1.0


def multilinear_frac_maximal(fs: Sequence[GridFunction], alpha: float, mode: str = "full") -> GridFunction:
    """``sup_Q |Q|^(alpha/n) prod_j avg_Q |f_j|``."""
    grid = _check_same_grid(*fs)
    m, n = len(fs), grid.n
    if not 0 <= alpha < m * n:
        raise ValueError(f"alpha must lie in [0, {m * n}), got {alpha}")
    _cubes.check_mode(mode)
    arrs = [np.abs(f.values) for f in fs]
    return GridFunction(grid, _cubes.cube_sup(grid.N, n, mode, _product_stats(arrs, grid.h, alpha, mode)))


def _product_stats(arrs, h, alpha, mode, power: float = 1.0):
    """Per-scale ``(s h)^alpha * prod_j (window mean of arrs[j])^power``."""
    its = [_cubes.iter_window_means(a, mode) for a in arrs]
    for items in zip(*its):
        s = items[0][0]
        v = items[0][1] ** power
        for _, w in items[1:]:
            v = v * w**power
        yield s, _scale_factor(s, h, alpha) * v


def multilinear_frac_maximal_r(
    fs: Sequence[GridFunction], alpha: float, r: float, mode: str = "full"
) -> GridFunction:
    """``sup_Q |Q|^(alpha/n) prod_j (avg_Q |f_j|^r)^(1/r)`` for ``r > 1``."""
    if not r > 1:
        raise ValueError(f"r must exceed 1, got {r}")
    grid = _check_same_grid(*fs)
    m, n = len(fs), grid.n
    if not 0 <= alpha < m * n:
        raise ValueError(f"alpha must lie in [0, {m * n}), got {alpha}")
    _cubes.check_mode(mode)
    arrs = [np.abs(f.values) ** r for f in fs]
    stats = _product_stats(arrs, grid.h, alpha, mode, power=1.0 / r)
    return GridFunction(grid, _cubes.cube_sup(grid.N, n, mode, stats))


LLOGL_RTOL = 1e-10


def _llogl_luxemburg(block: np.ndarray) -> np.ndarray:
    """Luxemburg ``L log L`` average of each row of ``block`` (last axis = cube cells).

    Bisection in ``log(lambda)`` on ``[1e-12, 1e6] * max|g|`` for the root of
    ``mean(|g|/lambda * log(e + |g|/lambda)) = 1``.
    """
    g = np.abs(block)
    top = g.max(axis=-1)
    zero = top <= 0
    safe = np.where(zero, 1.0, top)
    lo = np.log(1e-12 * safe)
    hi = np.log(1e6 * safe)
    while True:
        mid = 0.5 * (lo + hi)
        t = g / np.exp(mid)[..., None]
        F = np.mean(t * np.log(np.e + t), axis=-1)
        big = F > 1.0
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
        # relative width of the lambda bracket
        if np.all(np.expm1(hi - lo) <= LLOGL_RTOL):
            break
    lam = np.exp(0.5 * (lo + hi))
    return np.where(zero, 0.0, lam)


def orlicz_llogl_average(f: GridFunction, Q: Cube) -> float:
    """Luxemburg average ``||f||_{L log L, Q}``."""
    if Q.grid != f.grid:
        raise ValueError("cube and function live on different grids")
    block = f.values[Q.slices].reshape(1, -1)
    return float(_llogl_luxemburg(block)[0])


def multilinear_frac_maximal_llogl(
    fs: Sequence[GridFunction], alpha: float, slot: int | str = "all", mode: str = "full"
) -> GridFunction:
    """Multilinear fractional maximal function with ``L log L`` averages.

    ``slot`` is a 0-based index (Luxemburg average in that slot only, plain
    averages elsewhere) or ``"all"`` (Luxemburg averages in every slot).
    """
    grid = _check_same_grid(*fs)
    m, n = len(fs), grid.n
    if not 0 <= alpha < m * n:
        raise ValueError(f"alpha must lie in [0, {m * n}), got {alpha}")
    if slot != "all" and not (isinstance(slot, (int, np.integer)) and 0 <= slot < m):
        raise ValueError(f"slot must be in 0..{m - 1} or 'all', got {slot!r}")
    _cubes.check_mode(mode)
    arrs = [np.abs(f.values) for f in fs]
    its = [
        _cubes.per_scale(grid.N, mode, lambda s, a=a: _cubes.window_stat(a, s, mode, _llogl_luxemburg))
        if slot == "all" or j == slot
        else _cubes.iter_window_means(a, mode)
        for j, a in enumerate(arrs)
    ]

    def stats():
        for items in zip(*its):
            s = items[0][0]
            v = items[0][1]
            for _, w in items[1:]:
                v = v * w
            yield s, _scale_factor(s, grid.h, alpha) * v

    return GridFunction(grid, _cubes.cube_sup(grid.N, n, mode, stats()))


def llogl_maximal(f: GridFunction, mode: str = "full") -> GridFunction:
    """``M_{L log L} f(x) = sup_Q ||f||_{L log L, Q}``."""
    return multilinear_frac_maximal_llogl([f], 0.0, "all", mode)


def iterated_maximal(f: GridFunction, k: int, mode: str = "full") -> GridFunction:
    """``M^k f``: the maximal operator applied ``k`` times."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    g = f
    for _ in range(int(k)):
        g = hl_maximal(g, mode)
    return g


def default_sharp_delta(m: int, n: int, alpha: float) -> float:
    """``0.5 * min(1, n / (mn - alpha))``: inside the admissible range for delta."""
    return 0.5 * min(1.0, n / (m * n - alpha))
