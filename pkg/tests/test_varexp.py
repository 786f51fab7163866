import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlfczo.grid import Grid, GridFunction, lp_norm
from mlfczo.varexp import (
    ExponentFunction,
    check_generalized_holder,
    check_multi_holder,
    conjugate,
    constant_exponent,
    exponent_from_dict,
    harmonic_exponent_sum,
    log_holder_constants,
    luxemburg_norm,
    modular,
)


def grid(N=128, n=1):
    return Grid.make(n, -1.0, 2.0, N)


def rand_f(g, seed):
    return GridFunction(g, np.random.default_rng(seed).normal(size=g.shape) * 3.0)


@given(st.integers(0, 2**31 - 1), st.floats(1.1, 6.0))
@settings(max_examples=50, deadline=None)
def test_constant_exponent_collapses_to_lq(seed, q):
    g = grid()
    f = rand_f(g, seed)
    assert luxemburg_norm(f, constant_exponent(q, g)) == pytest.approx(lp_norm(f, q), rel=1e-8)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_unit_ball_property(seed):
    g = grid()
    q = exponent_from_dict({"type": "bump", "base": 2.0, "amp": 1.0, "width": 0.4}, g)
    f = rand_f(g, seed)
    eta = luxemburg_norm(f, q)
    assert modular(f / eta, q) == pytest.approx(1.0, abs=1e-8)


def test_luxemburg_homogeneous():
    g = grid()
    q = exponent_from_dict({"type": "ramp", "base": 1.5, "amp": 1.0}, g)
    f = rand_f(g, 1)
    assert luxemburg_norm(f * 7.0, q) == pytest.approx(7.0 * luxemburg_norm(f, q), rel=1e-9)
    assert luxemburg_norm(g.zeros(), q) == 0.0


def test_conjugate():
    g = grid(16)
    q = exponent_from_dict({"type": "jump", "base": 2.0, "amp": 1.0}, g)
    qc = conjugate(q)
    assert np.allclose(1 / q.values + 1 / qc.values, 1.0)
    with pytest.raises(ValueError):
        conjugate(constant_exponent(1.0, g))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=50, deadline=None)
def test_generalized_holder(seed):
    g = grid()
    q = exponent_from_dict({"type": "bump", "base": 1.8, "amp": 1.5, "width": 0.3}, g)
    r = check_generalized_holder(rand_f(g, seed), rand_f(g, seed + 1), q)
    assert r.ok and r.ratio <= 2.0


def test_multi_holder():
    g = grid()
    q1 = exponent_from_dict({"type": "ramp", "base": 3.0, "amp": 1.0}, g)
    q2 = constant_exponent(4.0, g)
    q = harmonic_exponent_sum([q1, q2])
    r = check_multi_holder([rand_f(g, 1), rand_f(g, 2)], [q1, q2], q)
    assert r.ok
    with pytest.raises(ValueError):
        check_multi_holder([rand_f(g, 1), rand_f(g, 2)], [q1, q2], q1)


def test_harmonic_sum_can_leave_class_p():
    g = grid(16)
    p = harmonic_exponent_sum([constant_exponent(2.0, g)] * 2)
    assert p.q_minus == pytest.approx(1.0)
    assert not p.in_class_P and p.in_class_P0


def test_log_holder_ramp_stable_jump_grows():
    ramp = [log_holder_constants(exponent_from_dict({"type": "ramp", "base": 2.0, "amp": 0.5}, grid(N))).C_loc
            for N in (64, 128)]
    assert ramp[1] == pytest.approx(ramp[0], rel=0.05)
    jump = [log_holder_constants(exponent_from_dict({"type": "jump", "base": 2.0, "amp": 0.5}, grid(N))).C_loc
            for N in (64, 128)]
    # |q(x) - q(y)| ln(1/h) across the jump
    assert jump[1] - jump[0] == pytest.approx(0.5 * math.log(2), rel=1e-9)


def test_log_holder_constant_exponent():
    lh = log_holder_constants(constant_exponent(3.0, grid(32)))
    assert lh.C_loc == 0.0 and lh.C_inf == 0.0 and lh.q_inf == 3.0


def test_exponent_validation():
    g = grid(8)
    with pytest.raises(ValueError):
        ExponentFunction(g, np.zeros(8))
    with pytest.raises(ValueError):
        exponent_from_dict({"type": "wiggle"}, g)


def test_exponent_2d():
    g = grid(16, 2)
    q = exponent_from_dict({"type": "bump", "base": 2.0, "amp": 1.0, "center": [0.0, 0.0]}, g)
    assert q.q_plus <= 3.0 and q.q_minus >= 2.0
    f = rand_f(g, 3)
    assert luxemburg_norm(f, constant_exponent(2.0, g)) == pytest.approx(lp_norm(f, 2), rel=1e-9)
