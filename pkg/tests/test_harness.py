import math

import numpy as np
import pytest

from mlfczo import harness as H
from mlfczo.grid import Cube, Grid, GridFunction, lp_norm
from mlfczo.kernelcore import perturbed_riesz_kernel, riesz_kernel
from mlfczo.operators import apply_T
from mlfczo.weights import power_weight

K1 = riesz_kernel(1, 1, 0.5)
K2 = riesz_kernel(2, 1, 0.5)


@pytest.fixture(scope="module")
def g64():
    return Grid.make(1, -1.0, 2.0, 64)


@pytest.fixture(scope="module")
def g128():
    return Grid.make(1, -1.0, 2.0, 128)


# ---------------------------------------------------------------- families


@pytest.mark.parametrize("kind", ["indicators", "bumps", "oscillations", "spikes", "mixed"])
@pytest.mark.parametrize("n", [1, 2])
def test_family_support_and_bounds(kind, n):
    g = Grid.make(n, -1.0, 2.0, 64 if n == 1 else 32)
    for case in H.TestFamily(kind, 6, seed=3, m=2).cases(g):
        for f in case:
            v = f.values
            assert np.all(np.isfinite(v))
            r = np.abs(g.centers())
            outside = np.any(r >= 0.5, axis=-1)
            assert np.all(v[outside] == 0)
            assert np.any(v != 0)


def test_family_is_deterministic_and_prefix_stable(g64):
    small = H.TestFamily("mixed", 3, seed=9, m=2).cases(g64)
    big = H.TestFamily("mixed", 6, seed=9, m=2).cases(g64)
    again = H.TestFamily("mixed", 6, seed=9, m=2).cases(g64)
    for a, b in zip(small, big):
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    for a, b in zip(big, again):
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))


def test_oscillations_are_mean_zero(g64):
    for (f,) in H.TestFamily("oscillations", 10, seed=1).cases(g64):
        assert abs(np.sum(f.values)) <= 1e-12 * np.sum(np.abs(f.values))


def test_indicators_aligned_across_grids():
    fam = H.TestFamily("indicators", 5, seed=2)
    for N in (32, 64, 256):
        g = Grid.make(1, -1.0, 2.0, N)
        masses = [g.cell_volume * np.sum(f.values) for (f,) in fam.cases(g)]
        if N == 32:
            ref = masses
        assert masses == pytest.approx(ref, rel=1e-14)


def test_normalized_family(g64):
    for case in H.TestFamily("spikes", 4, seed=5, m=2, normalize=True).cases(g64):
        assert all(lp_norm(f, 1) == pytest.approx(1.0, rel=1e-14) for f in case)


def test_family_validation():
    with pytest.raises(ValueError):
        H.TestFamily("gaussians", 3)
    with pytest.raises(ValueError):
        H.TestFamily("bumps", -1)


def test_family_slot_count_must_match(g64):
    with pytest.raises(ValueError):
        H.check_endpoint_weak(K2, H.TestFamily("bumps", 2, m=1), g64)


def test_monotone_in_family_size(g64):
    cs = [H.check_endpoint_weak(K2, H.TestFamily("mixed", c, seed=4, m=2, normalize=True), g64).constant
          for c in (2, 5, 10)]
    assert cs[0] <= cs[1] <= cs[2]


# ---------------------------------------------------------------- endpoint weak


def test_endpoint_zero_family_is_trivial(g64):
    r = H.check_endpoint_weak(K2, H.TestFamily("zero", 3, m=2), g64)
    assert r.passed and r.constant == 0.0 and r.trivial_count == 3


def test_endpoint_riesz_of_interval(g128):
    f = g128.indicator(0.0, 0.5)
    r = H.check_endpoint_weak(K1, [(f,)])
    Tf = apply_T(K1, [f]).result
    from mlfczo.grid import weak_lq_norm

    assert r.constant == pytest.approx(weak_lq_norm(Tf, 2.0) / 0.5, rel=1e-12)
    r2 = H.check_endpoint_weak(K1, [(g128.refine().indicator(0.0, 0.5),)])
    assert 0.5 <= r2.constant / r.constant <= 2


def test_endpoint_refinement_stable(g64):
    res = H.refinement_stability(
        lambda g: H.check_endpoint_weak(K2, H.TestFamily("indicators", 6, seed=1, m=2, normalize=True), g), g64)
    assert res.ok and 0.5 <= res.ratio <= 2
    assert res.fine.refinement_ratio == res.ratio


def test_endpoint_lambda_sweep(g64):
    r = H.check_endpoint_weak(K2, H.TestFamily("bumps", 3, seed=1, m=2, normalize=True), g64,
                              lambdas=(0.5, 8.0), gammas=(0.5, 1.0))
    sweep = r.diagnostics["lambda_sweep"]
    assert len(sweep) == 4
    for row in sweep:
        assert row["cz_p4"] <= 1 + 1e-12
        assert row["cz_p3"] <= 4
        assert row["weak_at_lambda"] <= r.constant * (1 + 1e-12)


def test_broken_kernel_fails_and_propagates(g64):
    K = perturbed_riesz_kernel(2, 1, 0.5, 0.5)
    r = H.check_endpoint_weak(K, H.TestFamily("indicators", 2, m=2, normalize=True), g64)
    assert not r.passed
    res = H.refinement_stability(
        lambda g: H.check_endpoint_weak(K, H.TestFamily("indicators", 2, m=2, normalize=True), g), g64)
    assert not res.ok


def test_kernel_gate():
    assert H.kernel_gate(K2)[0]
    assert not H.kernel_gate(perturbed_riesz_kernel(2, 1, 0.5, 0.5))[0]


# ---------------------------------------------------------------- weighted


def unit_vector(P):
    return {"weights": [{"type": "constant"}] * len(P), "P": list(P)}


def test_weighted_unit_weights_reduce_to_unweighted(g64):
    fam = H.TestFamily("indicators", 4, seed=2, m=2)
    r = H.check_weighted(K2, unit_vector((3, 3)), fam, g64)
    q = 1 / (2 / 3 - 0.5)
    want = max(
        lp_norm(apply_T(K2, c).result, q) / (lp_norm(c[0], 3) * lp_norm(c[1], 3)) for c in fam.cases(g64)
    )
    assert r.params["mode"] == "strong" and r.params["q"] == pytest.approx(6.0)
    assert r.constant == pytest.approx(want, rel=1e-12)


def test_weighted_power_vector_stable(g64):
    v = {"weights": [{"type": "power", "a": -0.1}] * 2, "P": [2, 2]}
    res = H.refinement_stability(lambda g: H.check_weighted(K2, v, H.TestFamily("bumps", 3, m=2), g), g64)
    assert res.ok


def test_weighted_weak_form_when_p_is_one(g64):
    v = {"weights": [{"type": "power", "a": -0.1}] * 2, "P": [1, 2]}
    r = H.check_weighted(K2, v, H.TestFamily("indicators", 3, m=2), g64)
    assert r.params["mode"] == "weak" and r.passed and math.isfinite(r.constant)
    with pytest.raises(ValueError):
        H.check_weighted(K2, v, H.TestFamily("indicators", 3, m=2), g64, "strong")


def test_weighted_inadmissible(g64):
    fam = H.TestFamily("indicators", 1, m=2)
    # 1/p - alpha/n = 1/2 - 1/2 = 0
    with pytest.raises(ValueError):
        H.check_weighted(K2, unit_vector((4, 4)), fam, g64)
    bad_q = dict(unit_vector((3, 3)), q=5.0)
    with pytest.raises(ValueError):
        H.check_weighted(K2, bad_q, fam, g64)


def test_weighted_gate_rejects_unstable_weights(g64):
    # w^(-p') = |x|^-6 is far from integrable: the constant grows ~ 2^(5/2) per doubling
    v = {"weights": [{"type": "power", "a": 3.0}] * 2, "P": [2, 2]}
    r = H.check_weighted(K2, v, H.TestFamily("indicators", 1, m=2), g64)
    assert not r.passed
    assert any("refinement-stable" in n for n in r.notes)


# ---------------------------------------------------------------- sharp pointwise


def test_sharp_zero(g64):
    r = H.check_sharp_pointwise(K2, H.TestFamily("zero", 2, m=2), g64, 0.25)
    assert r.passed and r.trivial_count == 2


def test_sharp_default_delta_and_stability(g64):
    res = H.refinement_stability(
        lambda g: H.check_sharp_pointwise(K2, H.TestFamily("indicators", 3, seed=5, m=2), g), g64)
    assert res.fine.params["delta"] == pytest.approx(1 / 3)
    assert res.ok


@pytest.mark.parametrize("delta", [0.0, 1.0, 0.7])
def test_sharp_delta_range(delta, g64):
    # n / (mn - alpha) = 2/3 for m = 2, n = 1, alpha = 1/2
    with pytest.raises(ValueError):
        H.check_sharp_pointwise(K2, H.TestFamily("bumps", 1, m=2), g64, delta)


def test_sharp_covariance_under_central_shift():
    g = Grid.make(1, -1.0, 2.0, 128)
    case = H.TestFamily("bumps", 1, seed=2, m=2).cases(g)[0]
    shifted = tuple(f.shift(5) for f in case)
    T0 = apply_T(K2, case).result.values
    T1 = apply_T(K2, shifted).result.values
    # T commutes with whole-cell shifts exactly
    assert np.allclose(T1[5:], T0[:-5], rtol=1e-12, atol=1e-14)
    r0 = H.check_sharp_pointwise(K2, [case], delta=0.25).constant
    r1 = H.check_sharp_pointwise(K2, [shifted], delta=0.25).constant
    assert r1 == pytest.approx(r0, rel=0.1)


# ---------------------------------------------------------------- T vs maximal


def test_T_vs_maximal_q_range(g64):
    fam = H.TestFamily("indicators", 1, m=2)
    with pytest.raises(ValueError):
        H.check_T_vs_maximal(K2, fam, g64, q=2 / 3)
    H.check_T_vs_maximal(K2, fam, g64, q=2 / 3, strong_or_weak="weak")
    with pytest.raises(ValueError):
        H.check_T_vs_maximal(K2, fam, g64, q=0.5, strong_or_weak="weak")


def test_T_vs_maximal_zero_and_norm_comparison(g64):
    r = H.check_T_vs_maximal(K2, H.TestFamily("zero", 2, m=2), g64, q=2.0)
    assert r.passed and r.trivial_count == 2
    fam = H.TestFamily("indicators", 4, m=2)
    strong = H.check_T_vs_maximal(K2, fam, g64, q=2.0)
    weak = H.check_T_vs_maximal(K2, fam, g64, q=2.0, strong_or_weak="weak")
    for s, w in zip(strong.cases, weak.cases):
        assert w.lhs <= s.lhs * (1 + 1e-12)
        assert w.rhs <= s.rhs * (1 + 1e-12)


def test_T_vs_maximal_weight_gate(g64):
    fam = H.TestFamily("indicators", 2, m=2)
    good = H.check_T_vs_maximal(K2, fam, g64, q=2.0, w={"type": "power", "a": 0.5})
    assert good.passed and good.diagnostics["a_infinity"] is not None
    bad = H.check_T_vs_maximal(K2, fam, g64, q=2.0, w=power_weight(-1.5, g64))
    assert not bad.passed


# ---------------------------------------------------------------- Fefferman-Stein


@pytest.mark.parametrize("delta", [1.0, 0.5])
def test_fefferman_stein_oscillations(delta, g64):
    r = H.check_fefferman_stein(H.TestFamily("oscillations", 5, seed=1), g64, delta=delta, p=2.0)
    assert r.passed and math.isfinite(r.constant) and r.constant >= 1
    assert math.isfinite(r.diagnostics["weak_constant"])


def test_fefferman_stein_constant_function_is_boundary_artifact(g64):
    f = GridFunction(g64, np.full(64, 2.0))
    r = H.check_fefferman_stein([(f,)], p=1.0)
    assert r.trivial_count == 1 and not r.passed


def test_fefferman_stein_delta_range(g64):
    with pytest.raises(ValueError):
        H.check_fefferman_stein(H.TestFamily("oscillations", 1), g64, delta=2.0)


# ---------------------------------------------------------------- Kolmogorov


def test_kolmogorov_indicator_exact(g64):
    Q = Cube(g64, (16,), 32)
    f = GridFunction(g64, Q.mask().astype(float))
    r = H.check_kolmogorov([(f,)], p=1.0, q=2.0, Q=Q)
    assert r.constant == pytest.approx(1.0, abs=1e-12)


def test_kolmogorov_zero_and_random(g64):
    r = H.check_kolmogorov(H.TestFamily("zero", 2), g64)
    assert r.passed and r.trivial_count == 2
    r = H.check_kolmogorov(H.TestFamily("mixed", 100, seed=3), g64, 1.0, 2.0)
    assert r.passed and r.constant <= H.kolmogorov_bound(1.0, 2.0)
    assert r.diagnostics["alpha"] == pytest.approx(0.5)


def test_kolmogorov_forms_agree(g64):
    r = H.check_kolmogorov(H.TestFamily("spikes", 10, seed=3), g64, 1.5, 3.0)
    assert r.diagnostics["alpha_form_constant"] == pytest.approx(r.constant, rel=1e-12)


def test_kolmogorov_p_below_q(g64):
    with pytest.raises(ValueError):
        H.check_kolmogorov(H.TestFamily("bumps", 1), g64, 2.0, 2.0)


# ---------------------------------------------------------------- variable exponents


def test_varexp_constant_exponents_match_unweighted(g64):
    fam = H.TestFamily("indicators", 3, seed=7, m=2)
    ve = H.check_varexp_bound(K2, [{"type": "constant", "q": 3.0}] * 2, (0.25, 0.25), fam, g64)
    wt = H.check_weighted(K2, unit_vector((3, 3)), fam, g64)
    assert ve.constant == pytest.approx(wt.constant, rel=1e-8)
    assert ve.passed


def test_varexp_ramp_stable(g64):
    ramp = {"type": "ramp", "base": 2.2, "amp": 0.6, "radius": 1.0}
    res = H.refinement_stability(
        lambda g: H.check_varexp_bound(K2, [ramp] * 2, (0.25, 0.25), H.TestFamily("bumps", 3, m=2), g), g64)
    assert res.ok
    d = res.fine.diagnostics
    assert d["chain_product"] <= 2.0 and math.isfinite(d["chain_lemma"])


def test_varexp_zero(g64):
    r = H.check_varexp_bound(K2, [{"type": "constant", "q": 3.0}] * 2, (0.25, 0.25),
                             H.TestFamily("zero", 2, m=2), g64)
    assert r.passed and r.trivial_count == 2


def test_varexp_gates_reported_not_clamped(g64):
    fam = H.TestFamily("indicators", 1, m=2)
    jump = {"type": "jump", "base": 2.5, "amp": 1.0}
    r = H.check_varexp_bound(K2, [jump] * 2, (0.25, 0.25), fam, g64.refine())
    assert not r.passed and any("log-Hoelder" in n for n in r.notes)
    # p_+ = 5 >= n / alpha_1 = 4
    big = {"type": "constant", "q": 5.0}
    r = H.check_varexp_bound(K2, [big, {"type": "constant", "q": 2.0}], (0.25, 0.25), fam, g64)
    assert not r.passed and any("n/alpha_1" in n for n in r.notes)
    # 1/q = 1/4 + 1/4 - 1/2 = 0
    r = H.check_varexp_bound(K2, [{"type": "constant", "q": 4.0}] * 2, (0.25, 0.25), fam, g64)
    assert not r.passed and not r.cases


def test_varexp_bad_split(g64):
    with pytest.raises(ValueError):
        H.check_varexp_bound(K2, [{"type": "constant", "q": 3.0}] * 2, (0.25, 0.5),
                             H.TestFamily("bumps", 1, m=2), g64)


# ---------------------------------------------------------------- product domination


@pytest.mark.parametrize("mode", ["full", "dyadic"])
def test_product_domination_holds(mode, g64):
    r = H.check_product_domination(H.TestFamily("mixed", 10, seed=2, m=2), 1.0, (0.5, 0.5), g64, mode)
    assert r.passed and r.constant <= 1 + 1e-12


def test_product_domination_2d():
    g = Grid.make(2, -1.0, 2.0, 16)
    r = H.check_product_domination(H.TestFamily("mixed", 3, m=2), 1.5, (0.5, 1.0), g)
    assert r.passed


def test_product_domination_equality_and_exact_refinement(g64):
    def handle(g):
        f = g.indicator(-0.25, 0.25)
        return H.check_product_domination([(f, f)], 1.0, (0.5, 0.5))

    r = handle(g64)
    assert r.constant == pytest.approx(1.0, rel=1e-13)
    res = H.refinement_stability(handle, g64)
    assert res.ratio == pytest.approx(1.0, rel=1e-12)


def test_product_domination_zero_slot(g64):
    f = g64.indicator(-0.25, 0.25)
    r = H.check_product_domination([(f, g64.zeros())], 1.0, (0.5, 0.5))
    assert r.passed and r.trivial_count == 1


@pytest.mark.parametrize("split", [(0.5, 0.4), (1.0, 0.0), (1.2, -0.2)])
def test_product_domination_bad_split(split, g64):
    with pytest.raises(ValueError):
        H.check_product_domination(H.TestFamily("bumps", 1, m=2), 1.0, split, g64)


# ---------------------------------------------------------------- scalar checks and plumbing


def test_tail_integral_check():
    r = H.check_tail_integral(1, 0.5, 1.0)
    assert r.passed and r.diagnostics["lhs"] == pytest.approx(4.0, abs=1e-3)
    assert H.tail_closed_form(2, 1.0, 1.0) == pytest.approx(math.pi)


def test_ap_constant_check(g64):
    r = H.check_ap_constant(g64, 0.5)
    assert r.passed and r.constant >= 1 and r.diagnostics["in_class_range"]
    assert not H.check_ap_constant(g64, -1.5).diagnostics["in_class_range"]


def test_threads_do_not_change_results(g64):
    fam = H.TestFamily("mixed", 6, seed=1, m=2)
    a = H.check_sharp_pointwise(K2, fam, g64, 0.25)
    H.set_threads(3)
    try:
        b = H.check_sharp_pointwise(K2, fam, g64, 0.25)
    finally:
        H.set_threads(1)
    assert a.to_dict() == b.to_dict() and a.rows() == b.rows()
    with pytest.raises(ValueError):
        H.set_threads(0)


def test_report_serialization(g64):
    r = H.check_kolmogorov(H.TestFamily("bumps", 3), g64)
    d = r.to_dict()
    assert d["check"] == "kolmogorov" and d["cases"] == 3 and d["N"] == 64
    assert len(r.rows()) == 3 and r.rows()[0][:3] == ["kolmogorov", 64, 0]


def test_registry_covers_checks():
    for name in ("endpoint-weak", "weighted", "sharp-pointwise", "T-vs-maximal", "fefferman-stein",
                 "kolmogorov", "varexp-bound", "product-domination"):
        assert set(H.CHECK_INFO[name]) == {"statement", "parameters", "pass"}
