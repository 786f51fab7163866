import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlfczo.grid import (
    Box,
    Cube,
    Grid,
    GridFunction,
    average_on_cube,
    cube_family,
    integrate,
    iter_cubes,
    lp_norm,
    weak_lq_norm,
)


def test_grid_geometry(grid1):
    assert grid1.h == 0.125
    assert grid1.shape == (16,)
    assert grid1.centers()[0, 0] == pytest.approx(-0.9375)
    assert grid1.cell_of([0.0]) == (8,)
    assert grid1.refine(2).N == 32


@pytest.mark.parametrize("N", [0, 3, 12])
def test_grid_rejects_non_power_of_two(N):
    with pytest.raises(ValueError):
        Grid.make(1, 0.0, 1.0, N)


def test_box_validation():
    with pytest.raises(ValueError):
        Box(3, (0.0, 0.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        Box(1, (0.0,), -1.0)
    with pytest.raises(ValueError):
        Grid.make(1, 0.0, 1.0, 4).cell_of([1.0])


def test_cube_bounds(grid1):
    with pytest.raises(ValueError):
        Cube(grid1, (15,), 2)
    Q = Cube(grid1, (4,), 4)
    assert Q.measure == pytest.approx(0.5)
    assert Q.is_dyadic()
    assert not Cube(grid1, (2,), 4).is_dyadic()


def test_integral_of_indicator_is_exact(grid1):
    f = grid1.indicator(-0.5, 0.25)
    assert integrate(f) == 0.75
    assert lp_norm(f, 2) == pytest.approx(math.sqrt(0.75), rel=1e-15)


def test_weak_norm_of_indicator(grid1):
    f = grid1.indicator(0.0, 0.5) * 3.0
    # sup_t t |{f > t}|^(1/q) = 3 * 0.5^(1/q)
    assert weak_lq_norm(f, 2.0) == pytest.approx(3.0 * 0.5**0.5, rel=1e-15)


def test_weak_norm_of_zero(grid1):
    assert weak_lq_norm(grid1.zeros(), 1.5) == 0.0


@given(st.integers(0, 2**31 - 1), st.floats(0.5, 6.0))
@settings(max_examples=40, deadline=None)
def test_weak_norm_below_strong_norm(seed, q):
    g = Grid.make(1, 0.0, 1.0, 32)
    f = GridFunction(g, np.random.default_rng(seed).normal(size=32))
    assert weak_lq_norm(f, q) <= lp_norm(f, q) * (1 + 1e-12)


@given(st.integers(0, 2**31 - 1), st.integers(-20, 20))
@settings(max_examples=40, deadline=None)
def test_integral_shift_invariant_inside_box(seed, d):
    g = Grid.make(1, 0.0, 1.0, 64)
    v = np.zeros(64)
    v[22:42] = np.random.default_rng(seed).normal(size=20)
    f = GridFunction(g, v)
    assert integrate(f.shift(d)) == integrate(f)


@pytest.mark.parametrize("mode", ["full", "dyadic"])
def test_cube_family_contains_point(grid2, mode):
    x = [0.3, -0.6]
    idx = grid2.cell_of(x)
    fam = cube_family(grid2, x, mode)
    assert all(Q.contains_cell(idx) for Q in fam)
    everything = [Q for Q in iter_cubes(grid2, mode) if Q.contains_cell(idx)]
    assert len(fam) == len(everything)


def test_dyadic_family_size(grid1):
    assert len(cube_family(grid1, [0.1], "dyadic")) == 5


def test_average_on_cube(grid1):
    f = grid1.sample(lambda x: x)
    Q = Cube(grid1, (0,), 16)
    assert average_on_cube(f, Q) == pytest.approx(0.0, abs=1e-15)


def test_grid_function_is_immutable(grid1):
    f = grid1.zeros()
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_mismatched_grids_rejected(grid1):
    other = Grid.make(1, -1.0, 2.0, 32)
    with pytest.raises(ValueError):
        grid1.zeros() + other.zeros()
