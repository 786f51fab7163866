"""Shared fixtures and brute-force oracles (cube-by-cube enumeration)."""

import math

import numpy as np
import pytest

from mlfczo.grid import Grid, GridFunction, iter_cubes


@pytest.fixture
def grid1():
    return Grid.make(1, -1.0, 2.0, 16)


@pytest.fixture
def grid2():
    return Grid.make(2, -1.0, 2.0, 8)


def random_function(grid, seed=0, positive=False):
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.0, 1.0, grid.shape) if positive else rng.normal(size=grid.shape)
    return GridFunction(grid, v)


def brute_sup(grid, mode, cube_value):
    """``out[x] = max over cubes Q containing x of cube_value(Q)``."""
    out = np.full(grid.shape, -math.inf)
    for Q in iter_cubes(grid, mode):
        out[Q.slices] = np.maximum(out[Q.slices], cube_value(Q))
    return out


def brute_multi_frac_maximal(fs, alpha, mode="full"):
    grid = fs[0].grid

    def val(Q):
        v = Q.measure ** (alpha / grid.n)
        for f in fs:
            v *= np.mean(np.abs(f.values[Q.slices]))
        return v

    return brute_sup(grid, mode, val)


def brute_ap(w, p, mode="full"):
    best = 0.0
    for Q in iter_cubes(w.grid, mode):
        b = w.values[Q.slices]
        best = max(best, np.mean(b) * np.mean(b ** (-1.0 / (p - 1))) ** (p - 1))
    return best
