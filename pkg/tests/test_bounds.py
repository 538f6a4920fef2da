import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from supremal.bounds import (
    AsymptoticSpec,
    TheoremId,
    asymptotic_bound,
    asymptotic_spec_for,
    chernoff_tail_bound,
    exp_tail_bound,
    hoeffding_sup_bound,
    model_bound,
    model_exp_bound,
    poly_tail_bound,
    quantile_bounds,
    rate_certificates,
)
from supremal.distributions import Cauchy, Normal, TwoPoint, Uniform
from supremal.errors import (
    DegenerateQuantile,
    InvalidParameter,
    InvalidSupport,
    MgfDivergence,
    MissingConstants,
    MissingLimits,
    NonUniqueMinimizer,
)
from supremal.population import PopulationModel, MinimumSet, build_model, model_envelope
from supremal.presets import get_preset
from supremal.scores import build_score, loss_for


def Phi(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def kl(a, p):
    return a * math.log(a / p) + (1 - a) * math.log((1 - a) / (1 - p))


_MODELS = {}


def preset(name):
    # models memoize K and Chernoff exponents, so reuse them across examples
    if name not in _MODELS:
        _MODELS[name] = get_preset(name)
    return _MODELS[name]


QUANTILE = get_preset("quantile")
MEAN_U01 = get_preset("hoeffding_mean")
BOUNDED = ["quantile", "hoeffding_mean", "smoothed_median", "normal_cdf_score"]


def test_exp_abs_quantile_example():
    d = Phi(0.3) - 0.5
    assert d == pytest.approx(0.117911, abs=1e-6)
    b = model_exp_bound("abs", QUANTILE, 50, 0.3)
    assert b.theorem_id is TheoremId.EXP_ABS
    assert b.raw == pytest.approx(2 * math.exp(-100 * d * d), rel=1e-13)
    assert b.raw == pytest.approx(0.4980, abs=1e-4)
    assert b.constants["A"] == 1.0


def test_exp_degenerate_eta():
    flat = build_model(loss_for(build_score("quantile_step", alpha=0.5)), TwoPoint(0.5, 0.0, 1.0))
    assert flat.K(0.5) == 0.0
    env = model_envelope(flat)
    assert exp_tail_bound("sup", env, flat.K, 10, 0.5).raw == 1.0
    abs_b = exp_tail_bound("abs", env, flat.K, 10, 0.5)
    assert abs_b.raw == 2.0 and abs_b.clamped == 1.0


@pytest.mark.parametrize("n,x", [(1, 0.1), (20, 0.2), (200, 0.05), (50, 0.49)])
def test_exp_abs_mean_uniform_is_hoeffding(n, x):
    b = model_exp_bound("abs", MEAN_U01, n, x)
    assert b.raw == pytest.approx(2 * math.exp(-2 * n * x * x), rel=1e-12)
    assert b.raw == pytest.approx(hoeffding_sup_bound(0.0, 1.0, n, x).raw, rel=1e-12)


def test_exp_one_sided_pieces():
    m = get_preset("quantile", alpha=0.3)
    sup = model_exp_bound("sup", m, 40, 0.4)
    inf = model_exp_bound("inf", m, 40, 0.4)
    assert sup.raw == pytest.approx(math.exp(-80 * (Phi(m.m + 0.4) - 0.3) ** 2), rel=1e-12)
    assert inf.raw == pytest.approx(math.exp(-80 * (0.3 - Phi(m.m - 0.4)) ** 2), rel=1e-12)


@pytest.mark.parametrize("n,x", [(50, 0.3), (20, 0.1), (100, 0.5)])
def test_chernoff_quantile_is_kl(n, x):
    p = Phi(x)
    b = chernoff_tail_bound("sup", QUANTILE, n, x)
    assert b.raw == pytest.approx(math.exp(-n * kl(0.5, p)), rel=1e-9)
    a = get_preset("quantile", alpha=0.3)
    lo = chernoff_tail_bound("inf", a, n, x)
    assert lo.raw == pytest.approx(math.exp(-n * kl(0.3, Phi(a.m - x))), rel=1e-9)


def test_chernoff_abs_is_sum():
    a = get_preset("quantile", alpha=0.3)
    s = chernoff_tail_bound("sup", a, 30, 0.2).raw
    i = chernoff_tail_bound("inf", a, 30, 0.2).raw
    assert chernoff_tail_bound("abs", a, 30, 0.2).raw == pytest.approx(s + i, rel=1e-15)


def test_chernoff_gaussian_mean():
    # log E exp(theta (X - x)) = theta^2/2 - theta x, so the exponent is x^2/2
    m = build_model(loss_for(build_score("identity")), Normal())
    for x in (0.2, 0.5):
        b = chernoff_tail_bound("sup", m, 30, x)
        assert b.constants["beta"] == pytest.approx(x * x / 2, rel=1e-7)
        assert b.constants["theta"] == pytest.approx(x, rel=1e-4)


def test_chernoff_degenerate_and_divergent():
    flat = build_model(loss_for(build_score("quantile_step", alpha=0.5)), TwoPoint(0.5, 0.0, 1.0))
    assert chernoff_tail_bound("sup", flat, 10, 0.5).raw == 1.0
    bare = PopulationModel(loss_for(build_score("identity")), Cauchy(), 0.0, MinimumSet(0.0, 0.0, True))
    with pytest.raises(MgfDivergence):
        chernoff_tail_bound("sup", bare, 10, 0.5)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(BOUNDED), st.integers(1, 500), st.sampled_from([0.05, 0.1, 0.2, 0.3, 0.5, 0.8]))
def test_chernoff_dominates_exp(name, n, x):
    m = preset(name)
    assert chernoff_tail_bound("sup", m, n, x).raw <= model_exp_bound("sup", m, n, x).raw * (1 + 1e-12)
    assert chernoff_tail_bound("inf", m, n, x).raw <= model_exp_bound("inf", m, n, x).raw * (1 + 1e-12)


def test_poly_abs_quantile_example():
    d = Phi(0.3) - 0.5
    # |1{X <= m+x} - 1/2|^2 is 1/4 whatever the side, so mu_2 = 1/4
    mu2 = max(0.25 * Phi(0.3) + 0.25 * (1 - Phi(0.3)), 0.25 * Phi(-0.3) + 0.25 * (1 - Phi(-0.3)))
    b = poly_tail_bound("abs", QUANTILE, 100, 0.3, s=2)
    assert b.raw == pytest.approx(8 * mu2 / (d * d * 100), rel=1e-12)
    assert b.inputs["B_s"] == 1.0


def test_poly_homogeneity_in_n():
    for s, B in ((2.0, None), (3.0, 2.5), (4.0, 7.0)):
        b1 = poly_tail_bound("sup", QUANTILE, 25, 0.3, s=s, B_s=B).raw
        b4 = poly_tail_bound("sup", QUANTILE, 100, 0.3, s=s, B_s=B).raw
        assert b4 / b1 == pytest.approx(4 ** (-s / 2), rel=1e-13)
    b1 = poly_tail_bound("sup", QUANTILE, 50, 0.3).raw
    assert poly_tail_bound("sup", QUANTILE, 100, 0.3).raw == pytest.approx(b1 / 2, rel=1e-13)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0])
def test_poly_abs_gaussian_mean(x):
    m = build_model(loss_for(build_score("identity")), Normal())
    assert poly_tail_bound("abs", m, 40, x).raw == pytest.approx(8 * (1 + x * x) / (x * x * 40), rel=1e-10)


def test_poly_inf_uses_negative_radius():
    a = get_preset("quantile", alpha=0.2)
    b = poly_tail_bound("inf", a, 50, 0.4)
    p = Phi(a.m - 0.4)
    R_neg = 0.8**2 * p + 0.2**2 * (1 - p)
    assert b.raw == pytest.approx(4 * R_neg * (0.2 - p) ** -2 / 50, rel=1e-12)


def test_poly_errors():
    with pytest.raises(MissingConstants, match="B_s required for s>2"):
        poly_tail_bound("abs", QUANTILE, 50, 0.3, s=4)
    flat = build_model(loss_for(build_score("quantile_step", alpha=0.5)), TwoPoint(0.5, 0.0, 1.0))
    with pytest.raises(NonUniqueMinimizer):
        poly_tail_bound("abs", flat, 10, 0.5)
    with pytest.raises(InvalidParameter):
        poly_tail_bound("abs", QUANTILE, 10, 0.3, s=1.5)


def test_quantile_bounds_example():
    qb = quantile_bounds(Normal(), 0.5, 50, 0.3)
    d = Phi(0.3) - 0.5
    rho = math.exp(-2 * d * d)
    assert rho == pytest.approx(0.97258, abs=1e-5)
    assert qb.ferger_sup.raw == qb.serfling_point.raw
    assert qb.ferger_sup.raw == pytest.approx(0.4980, abs=1e-4)
    assert qb.serfling_sup.raw == pytest.approx(qb.ferger_sup.raw / (1 - rho), rel=1e-10)
    assert qb.serfling_sup.raw == pytest.approx(18.16, abs=0.01)
    assert qb.serfling_sup.clamped == 1.0


def test_quantile_sup_bit_identical_to_exp_abs():
    for alpha in (0.1, 0.5, 0.75):
        m = get_preset("quantile", alpha=alpha)
        for n, x in ((10, 0.05), (50, 0.3), (333, 1.7)):
            assert quantile_bounds(m.dist, alpha, n, x).ferger_sup.raw == model_exp_bound("abs", m, n, x).raw


@given(st.floats(1e-3, 3.0), st.floats(0.05, 0.95), st.integers(1, 1000))
def test_serfling_ratio_identity(x, alpha, n):
    qb = quantile_bounds(Normal(), alpha, n, x)
    ratio = qb.serfling_sup.raw / qb.ferger_sup.raw
    d = qb.ferger_sup.constants["d"]
    assert ratio == pytest.approx(-1 / math.expm1(-2 * d * d), rel=1e-12)
    assert qb.ferger_sup.raw < qb.serfling_sup.raw


def test_serfling_ratio_diverges():
    ratios = [quantile_bounds(Normal(), 0.5, 50, x).serfling_sup.raw / quantile_bounds(Normal(), 0.5, 50, x).ferger_sup.raw
              for x in (1.0, 1e-1, 1e-3)]
    assert ratios[0] < ratios[1] < ratios[2]
    assert ratios[2] > 1e5


def test_quantile_bounds_degenerate():
    with pytest.raises(DegenerateQuantile):
        quantile_bounds(TwoPoint(0.5, 0.0, 1.0), 0.5, 10, 0.5)


def test_hoeffding_examples():
    assert hoeffding_sup_bound(0, 1, 200, 0.1).raw == pytest.approx(2 * math.exp(-4), rel=1e-14)
    assert hoeffding_sup_bound(0, 1, 200, 0.1).raw == pytest.approx(0.03663, abs=1e-5)
    z = hoeffding_sup_bound(0, 1, 5, 0.0)
    assert (z.raw, z.clamped) == (2.0, 1.0)
    assert hoeffding_sup_bound(-1.0, 2.0, 1, 3.0).raw == pytest.approx(2 * math.exp(-2), rel=1e-14)
    with pytest.raises(InvalidSupport):
        hoeffding_sup_bound(1, 1, 10, 0.1)
    with pytest.raises(InvalidParameter):
        hoeffding_sup_bound(0, 1, 0, 0.1)


def test_asymptotic_quantile():
    f0 = 1 / math.sqrt(2 * math.pi)
    spec = asymptotic_spec_for(QUANTILE)
    # root-n rescaled K at a large n approaches f(q) x
    n = 1e10
    for x in (0.5, 1.0, 2.0):
        assert math.sqrt(n) * QUANTILE.K(x / math.sqrt(n)) == pytest.approx(f0 * x, rel=1e-4)
        assert spec.delta_fn(x) == pytest.approx(f0 * x, rel=1e-8)
        assert asymptotic_bound("abs", spec, x) == pytest.approx(2 * math.exp(-2 * f0**2 * x * x), rel=1e-8)
    assert spec.tau == 1.0


def test_asymptotic_edge_cases():
    zero = AsymptoticSpec(lambda x: 0.0, (-0.5, 0.5, -0.5, 0.5))
    assert asymptotic_bound("sup", zero, 1.0) == 1.0
    lin = AsymptoticSpec(lambda x: 3.0 * x, (-0.5, 0.5, -0.5, 0.5))
    vals = [asymptotic_bound("abs", lin, x) for x in (1.0, 5.0, 50.0)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-300
    inf = AsymptoticSpec(lambda x: math.copysign(math.inf, x), (-0.5, 0.5, -0.5, 0.5))
    assert asymptotic_bound("abs", inf, 0.1) == 0.0
    assert asymptotic_bound("inf", lin, -1.0) == pytest.approx(math.exp(-18.0), rel=1e-14)
    with pytest.raises(MissingLimits):
        asymptotic_bound("abs", AsymptoticSpec(lambda x: x, None), 1.0)
    with pytest.raises(InvalidParameter):
        asymptotic_bound("inf", lin, 1.0)


def test_rate_certificates():
    c = rate_certificates("bounded", 0.4, 3, {"c": 0.2, "delta": 0.5, "A0": 1.0})
    assert c.admissible and c.r_quick and c.constants["K_threshold"] == pytest.approx(5.0)
    assert rate_certificates("bounded", 0.49, 10, {"c": 0.2, "delta": 0.5, "A0": 1.0}).admissible
    assert not rate_certificates("bounded", 0.5, 1, {"c": 0.2, "delta": 0.5, "A0": 1.0}).admissible
    mom = {"s": 4.0, "L_s": 0.3, "B_s": 2.0}
    assert not rate_certificates("moment", 0.25, 1.0, mom).admissible
    assert rate_certificates("moment", 0.25, 0.99, mom).admissible
    assert not rate_certificates("moment", 0.0, 2.0, mom).r_quick
    assert rate_certificates("moment", 0.0, 1.9, mom).r_quick
    assert rate_certificates("moment", 0.0, 1.0, mom).constants["K_s"] == pytest.approx(16 * 2.0 * 0.3)
    consts = {"c": 0.25, "delta": 0.5, "A0": 1.0}
    assert rate_certificates("bounded", 0.4, 1, {**consts, "K": 4.0}).big_o is False
    assert rate_certificates("bounded", 0.4, 1, {**consts, "K": 4.04}).big_o is True
    with pytest.raises(MissingConstants):
        rate_certificates("moment", 0.1, 1.0, {"s": 4.0})
    with pytest.raises(InvalidParameter):
        rate_certificates("weird", 0.1, 1.0, {})


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(BOUNDED), st.integers(1, 300), st.sampled_from([0.1, 0.3, 0.5]),
       st.sampled_from(["ExpAbs", "ChernoffAbs", "PolyAbs", "ExpSup", "ChernoffInf", "PolySup"]))
def test_bounds_nonincreasing_in_n(name, n, x, tid):
    m = preset(name)
    a = model_bound(TheoremId(tid), m, n, x).raw
    b = model_bound(TheoremId(tid), m, n + 7, x).raw
    assert b <= a * (1 + 1e-12)
    assert 0.0 <= model_bound(TheoremId(tid), m, n, x).clamped <= 1.0


def test_abs_bounds_nonincreasing_in_x():
    for name in BOUNDED:
        m = preset(name)
        xs = [0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0]
        for tid in (TheoremId.EXP_ABS, TheoremId.POLY_ABS):
            vals = [model_bound(tid, m, 50, x).raw for x in xs]
            assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:])), (name, tid)


def test_model_bound_dispatch_errors():
    with pytest.raises(InvalidParameter):
        model_bound(TheoremId.HOEFFDING_SUP, QUANTILE, 10, 0.1)
    with pytest.raises(InvalidParameter):
        model_bound(TheoremId.SERFLING_SUP, MEAN_U01, 10, 0.1)
    with pytest.raises(InvalidParameter):
        model_bound(TheoremId.ASYMPTOTIC_ABS, QUANTILE, 10, 0.1)
    with pytest.raises(InvalidParameter):
        model_exp_bound("abs", QUANTILE, 10, -0.1)


def test_bound_record_is_flat():
    rec = model_bound(TheoremId.POLY_ABS, QUANTILE, 100, 0.3).to_record()
    assert rec["theorem_id"] == "PolyAbs" and rec["n"] == 100 and rec["s"] == 2.0
    assert rec["clamped"] == min(rec["raw"], 1.0)
    assert all(not isinstance(v, dict) for v in rec.values())
