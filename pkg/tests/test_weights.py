import math

import numpy as np
import pytest
from conftest import brute_ap, random_function

from mlfczo.grid import Grid, GridFunction, iter_cubes
from mlfczo.weights import (
    Weight,
    WeightVector,
    a1_constant,
    a_infinity_surrogate,
    ap_constant,
    check_weight_implications,
    coarsen,
    derived_weights,
    multi_ap_constant,
    multi_apq_constant,
    power_weight,
    weight_from_dict,
    weight_vector_from_dict,
    weighted_lp_norm,
    weighted_weak_norm,
)

MODES = ["full", "dyadic"]


def grid(N, n=1):
    return Grid.make(n, -1.0, 2.0, N)


def test_unit_weight_is_exactly_one():
    w = weight_from_dict({"type": "constant"}, grid(64))
    for p in (1.0, 2.0, 3.5):
        assert ap_constant(w, p) == 1.0


def test_constant_weight_is_one_up_to_rounding():
    w = weight_from_dict({"type": "constant", "c": 3.0}, grid(64))
    for p in (1.0, 2.0, 3.5):
        assert ap_constant(w, p) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("p", [2.0, 3.0])
def test_ap_brute_force(mode, p, grid1):
    w = Weight(random_function(grid1, 1, positive=True) + 0.1)
    assert ap_constant(w, p, mode) == pytest.approx(brute_ap(w, p, mode), rel=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_a1_brute_force(mode, grid1):
    w = Weight(random_function(grid1, 2, positive=True) + 0.1)
    best = 0.0
    for Q in iter_cubes(grid1, mode):
        b = w.values[Q.slices]
        best = max(best, b.mean() / b.min())
    assert a1_constant(w, mode) == pytest.approx(best, rel=1e-12)


def test_ap_2d_brute_force(grid2):
    w = Weight(random_function(grid2, 3, positive=True) + 0.05)
    assert ap_constant(w, 2.0) == pytest.approx(brute_ap(w, 2.0), rel=1e-12)


@pytest.mark.parametrize("a", [-0.5, 0.5])
def test_power_weight_stable_inside_class(a):
    cs = [ap_constant(power_weight(a, grid(N)), 2.0) for N in (256, 512)]
    assert cs[1] == pytest.approx(cs[0], rel=0.05)


def test_power_weight_outside_class_grows():
    cs = [ap_constant(power_weight(-1.5, grid(N)), 2.0) for N in (64, 128, 256)]
    assert cs[0] < cs[1] < cs[2]


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0])
def test_ap_at_least_one(p):
    w = Weight(random_function(grid(32), 4, positive=True) + 0.01)
    assert ap_constant(w, p) >= 1 - 1e-12


def test_ap_monotone_in_p():
    w = power_weight(0.5, grid(64))
    cs = [ap_constant(w, p) for p in (1.5, 2.0, 3.0, 6.0)]
    assert all(a >= b * (1 - 1e-12) for a, b in zip(cs, cs[1:]))


def brute_multi(v, q=None, mode="full"):
    best = 0.0
    u, vp = derived_weights(v)
    for Q in iter_cubes(v.grid, mode):
        if q is None:
            val = np.mean(u.values[Q.slices]) ** (1 / v.p)
        else:
            val = np.mean(vp.values[Q.slices] ** q) ** (1 / q)
        for w, pj in zip(v.weights, v.P):
            b = w.values[Q.slices]
            if pj == 1:
                val *= 1 / b.min()
            else:
                pc = pj / (pj - 1)
                e = 1 - pc if q is None else -pc
                val *= np.mean(b**e) ** (1 / pc)
        best = max(best, val)
    return best


@pytest.mark.parametrize("P", [(2.0, 3.0), (1.0, 2.0)])
@pytest.mark.parametrize("mode", MODES)
def test_multi_constants_brute_force(P, mode, grid1):
    ws = [Weight(random_function(grid1, s, positive=True) + 0.1) for s in (5, 6)]
    v = WeightVector(ws, P, q=3.0)
    assert multi_ap_constant(v, mode) == pytest.approx(brute_multi(v, None, mode), rel=1e-12)
    assert multi_apq_constant(v, mode) == pytest.approx(brute_multi(v, 3.0, mode), rel=1e-12)


def test_multi_ap_with_unit_weights():
    g = grid(32)
    v = weight_vector_from_dict({"weights": [{"type": "constant"}] * 2, "P": [2, 2], "q": 4}, g)
    assert multi_ap_constant(v) == pytest.approx(1.0)
    # avg(1)^(1/q) prod avg(1)^(1/p_j') = 1
    assert multi_apq_constant(v) == pytest.approx(1.0)


def test_weight_vector_validation(grid1):
    w = Weight(grid1.zeros() + 1.0)
    with pytest.raises(ValueError):
        WeightVector([w], (0.5,))
    with pytest.raises(ValueError):
        WeightVector([w, w], (2.0,))
    with pytest.raises(ValueError):
        multi_apq_constant(WeightVector([w], (2.0,)))


def test_weight_must_be_positive(grid1):
    with pytest.raises(ValueError):
        Weight(grid1.zeros())


def test_implications_for_power_vector():
    g = grid(256)
    v = weight_vector_from_dict({"weights": [{"type": "power", "a": -0.1}] * 2, "P": [2, 2], "q": 4}, g)
    rep = check_weight_implications(v, "APq")
    assert rep.hypothesis_stable and rep.passed
    rep = check_weight_implications(v, "AP")
    assert rep.passed


def test_implications_skip_p_one_in_apq():
    g = grid(64)
    v = weight_vector_from_dict({"weights": [{"type": "power", "a": 0.1}] * 2, "P": [1, 2], "q": 2}, g)
    rep = check_weight_implications(v, "APq")
    assert len(rep.skipped) == 1
    assert len(check_weight_implications(v, "AP").implied) == 3


def test_coarsen_resamples_descriptor():
    w = power_weight(-0.9, grid(64))
    c = coarsen(w)
    assert c.grid.N == 32
    assert np.array_equal(c.values, power_weight(-0.9, grid(32)).values)
    anon = Weight(w.w)
    assert np.allclose(coarsen(anon).values, w.values.reshape(32, 2).mean(axis=1))


def test_a_infinity_surrogate():
    assert a_infinity_surrogate(power_weight(0.5, grid(256))) is not None
    assert a_infinity_surrogate(power_weight(-0.9, grid(256))) is not None
    assert a_infinity_surrogate(power_weight(-1.5, grid(256))) is None


def test_weighted_norms(grid1):
    f = grid1.indicator(0.0, 0.5)
    w = Weight(grid1.zeros() + 4.0)
    assert weighted_lp_norm(f, 2, w) == pytest.approx(math.sqrt(4 * 0.5))
    assert weighted_weak_norm(f, 2, w) == pytest.approx(math.sqrt(4 * 0.5))
    assert weighted_lp_norm(f, 2) == pytest.approx(math.sqrt(0.5))
    assert weighted_lp_norm(f * 3.0, math.inf, w) == 3.0


def test_power_of_weight_descriptor():
    w = power_weight(0.5, grid(16))
    w2 = w.power(2.0)
    assert np.allclose(w2.values, w.values**2)
    assert np.allclose(weight_from_dict(w2.descriptor, grid(16)).values, w2.values)
