"""Per-scale window machinery shared by the maximal operators and weight classes.

For a side ``s`` (in cells) the *windows* are the cubes of that side in the
chosen family: every offset ``0..N-s`` per axis in ``full`` mode, offsets
that are multiples of ``s`` in ``dyadic`` mode.  Window statistics are
arrays indexed by the window's lower corner; :func:`spread_max` turns them
into the pointwise sup over the windows containing each cell.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import maximum_filter1d, minimum_filter1d

MODES = ("full", "dyadic")

# element budget for materialized window blocks
_BLOCK_ELEMS = 1 << 22


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def scales(N: int, mode: str) -> list[int]:
    check_mode(mode)
    if mode == "full":
        return list(range(1, N + 1))
    return [1 << k for k in range(N.bit_length()) if (1 << k) <= N]


def window_sums(a: np.ndarray, s: int, mode: str) -> np.ndarray:
    """Sum of ``a`` over each window of side ``s``."""
    N = a.shape[0]
    if mode == "dyadic":
        k = N // s
        shape = []
        for _ in range(a.ndim):
            shape += [k, s]
        return a.reshape(shape).sum(axis=tuple(range(1, 2 * a.ndim, 2)))
    view = sliding_window_view(a, (s,) * a.ndim)
    return view.sum(axis=tuple(range(a.ndim, 2 * a.ndim)))


def iter_window_sums(a: np.ndarray, mode: str) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(s, window_sums(a, s, mode))`` for every scale, ascending.

    Each scale is built from the previous one by adding cells, never by
    differencing prefix sums, so nonnegative inputs keep full relative
    accuracy in small windows next to large values.
    """
    check_mode(mode)
    N, n = a.shape[0], a.ndim
    S = np.array(a, dtype=float)
    yield 1, S
    if mode == "dyadic":
        s = 1
        while 2 * s <= N:
            k = N // (2 * s)
            shape = []
            for _ in range(n):
                shape += [k, 2]
            S = S.reshape(shape).sum(axis=tuple(range(1, 2 * n, 2)))
            s *= 2
            yield s, S
        return
    if n == 1:
        for s in range(2, N + 1):
            S = S[:-1] + a[s - 1 :]
            yield s, S
        return
    # R: column strips of height s, C: row strips of width s
    R = np.array(a, dtype=float)
    C = np.array(a, dtype=float)
    for s in range(2, N + 1):
        R = R[:-1, :] + a[s - 1 :, :]
        S = S[:-1, :-1] + R[:, s - 1 :] + C[s - 1 :, :-1]
        C = C[:, :-1] + a[:, s - 1 :]
        yield s, S


def iter_window_means(a: np.ndarray, mode: str) -> Iterator[tuple[int, np.ndarray]]:
    for s, S in iter_window_sums(a, mode):
        yield s, S / float(s**a.ndim)


def window_means(a: np.ndarray, s: int, mode: str) -> np.ndarray:
    return window_sums(a, s, mode) / float(s**a.ndim)


def window_min(a: np.ndarray, s: int, mode: str) -> np.ndarray:
    N = a.shape[0]
    if mode == "dyadic":
        k = N // s
        shape = []
        for _ in range(a.ndim):
            shape += [k, s]
        return a.reshape(shape).min(axis=tuple(range(1, 2 * a.ndim, 2)))
    out = a
    for axis in range(a.ndim):
        out = minimum_filter1d(out, size=s, axis=axis, origin=-(s // 2), mode="nearest")
        out = np.take(out, np.arange(N - s + 1), axis=axis)
    return out


def spread_max(V: np.ndarray, s: int, N: int, mode: str) -> np.ndarray:
    """Per-cell max of ``V`` over the windows of side ``s`` that contain the cell."""
    if mode == "dyadic":
        out = V
        for axis in range(V.ndim):
            out = np.repeat(out, s, axis=axis)
        return out
    out = V
    for axis in range(V.ndim):
        pad = [(0, 0)] * V.ndim
        pad[axis] = (0, s - 1)
        out = np.pad(out, pad, constant_values=-np.inf)
        out = maximum_filter1d(
            out, size=s, axis=axis, origin=(s - 1) // 2, mode="constant", cval=-np.inf
        )
    return out


def window_blocks(a: np.ndarray, s: int, mode: str) -> Iterator[tuple[slice, np.ndarray]]:
    """Yield ``(rows, block)`` where ``block[..., :]`` lists the ``s**n`` cell
    values of each window whose first-axis offset index lies in ``rows``.

    Blocks are chunked along the first window axis to bound memory.
    """
    n = a.ndim
    N = a.shape[0]
    if mode == "dyadic":
        k = N // s
        shape = []
        for _ in range(n):
            shape += [k, s]
        b = a.reshape(shape).transpose(list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2)))
        b = b.reshape((k,) * n + (s**n,))
        yield slice(0, k), b
        return
    view = sliding_window_view(a, (s,) * n)
    W = N - s + 1
    per_row = max(1, W ** (n - 1) * s**n)
    step = max(1, _BLOCK_ELEMS // per_row)
    for r0 in range(0, W, step):
        r1 = min(W, r0 + step)
        blk = view[r0:r1]
        yield slice(r0, r1), blk.reshape(blk.shape[:n] + (s**n,))


def window_stat(a: np.ndarray, s: int, mode: str, fn) -> np.ndarray:
    """Apply ``fn(block) -> values`` to every window (reducing the last axis)."""
    parts = [fn(blk) for _, blk in window_blocks(a, s, mode)]
    return np.concatenate(parts, axis=0)


def window_measure(s: int, h: float, n: int) -> float:
    return (s * h) ** n


def cube_sup(N: int, n: int, mode: str, stats: Iterable[tuple[int, np.ndarray]]) -> np.ndarray:
    """Pointwise sup over the cube family of per-scale window statistics."""
    out = np.full((N,) * n, -np.inf)
    for s, V in stats:
        np.maximum(out, spread_max(V, s, N, mode), out=out)
    return out


def family_sup(stats: Iterable[tuple[int, np.ndarray]]) -> float:
    """Global sup over all cubes of the family."""
    best = -np.inf
    for _, V in stats:
        if V.size:
            best = max(best, float(np.max(V)))
    return best


def per_scale(N: int, mode: str, fn) -> Iterator[tuple[int, np.ndarray]]:
    """``(s, fn(s))`` over the scales of the family."""
    for s in scales(N, mode):
        yield s, fn(s)
