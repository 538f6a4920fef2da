import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from supremal.errors import IntegrationFailure, InvalidParameter
from supremal.scores import (
    ScoreKind,
    build_score,
    evaluate_score,
    loss_for,
    loss_one_sided_derivatives,
    loss_value,
    validate_score,
)

from conftest import PRESET_SCORES, continuous

GRID = np.round(np.arange(-10.0, 10.0 + 1e-9, 0.01), 10)


def test_quantile_step_values():
    phi = build_score("quantile_step", alpha=0.25)
    assert phi(-1.0) == -0.25
    assert phi(0.0) == 0.75
    assert evaluate_score(phi, 0.0, "left") == -0.25
    assert phi.jump_points == (0.0,)


def test_identity_values():
    phi = build_score("identity")
    assert phi(3.0) == 3.0
    assert phi.sup_abs == math.inf
    assert evaluate_score(phi, 0.0, "left") == evaluate_score(phi, 0.0, "right") == 0.0


def test_huber_values():
    phi = build_score("huber", c=1.0)
    assert (phi(2.0), phi(-2.0), phi(0.5)) == (1.0, -1.0, 0.5)


def test_smoothed_median_value():
    phi = build_score("smoothed_median", c=2.0)
    assert evaluate_score(phi, 1.0, "right") == evaluate_score(phi, 1.0, "left") == 0.25


@pytest.mark.parametrize("kind,params", [
    ("quantile_step", {"alpha": 0.0}),
    ("quantile_step", {"alpha": 1.5}),
    ("huber", {"c": 0.0}),
    ("smoothed_median", {"c": -1.0}),
    ("huber", {"width": 1.0}),
    ("no_such_score", {}),
])
def test_invalid_parameters(kind, params):
    with pytest.raises(InvalidParameter):
        build_score(kind, **params)


def test_only_identity_is_unbounded(preset_score):
    assert preset_score.bounded == (preset_score.kind is not ScoreKind.IDENTITY)
    assert bool(preset_score.jump_points) == (preset_score.kind is ScoreKind.QUANTILE_STEP)


def test_score_invariants_on_grid(preset_score):
    validate_score(preset_score)
    vals = preset_score.value(GRID)
    assert np.all(np.diff(vals) >= 0)
    if preset_score.bounded:
        assert np.all(np.abs(vals) <= preset_score.sup_abs)


def test_loss_values():
    assert loss_value(loss_for(build_score("identity")), 2.0) == 2.0
    assert loss_value(loss_for(build_score("quantile_step", alpha=0.25)), -1.0) == 0.25
    assert loss_value(loss_for(build_score("huber", c=1.0)), 2.0) == pytest.approx(1.5, abs=1e-15)


def test_loss_zero_at_origin(preset_score):
    assert loss_value(loss_for(preset_score), 0.0) == 0.0


def test_one_sided_derivative_examples():
    q = loss_for(build_score("quantile_step", alpha=0.5))
    assert loss_one_sided_derivatives(q, 0.0) == (-0.5, 0.5)
    assert loss_one_sided_derivatives(loss_for(build_score("normal_cdf_shift")), 0.0) == (0.0, 0.0)
    assert loss_one_sided_derivatives(loss_for(build_score("huber", c=1.0)), -3.0) == (-1.0, -1.0)


def test_one_sided_derivatives_ordered_and_monotone(preset_score):
    left, right = loss_one_sided_derivatives(loss_for(preset_score), GRID)
    assert np.all(left <= right)
    assert np.all(np.diff(left) >= 0) and np.all(np.diff(right) >= 0)


def test_finite_difference_matches_score(preset_score):
    if not continuous(preset_score):
        pytest.skip("jump score")
    loss = loss_for(preset_score)
    h = 1e-6
    u = np.linspace(-5, 5, 201)
    fd = (loss_value(loss, u + h) - loss_value(loss, u)) / h
    assert np.max(np.abs(fd - preset_score.value(u))) <= 1e-5


def test_closed_form_antiderivative_matches_quadrature(preset_score):
    loss = loss_for(preset_score)
    for u in (-3.7, -1.0, -0.2, 0.4, 1.0, 2.5):
        lo, hi = sorted((0.0, u))
        pts = [p for p in preset_score.kinks if lo < p < hi]
        ref = integrate.quad(lambda s: float(preset_score.value(s)), lo, hi, points=pts or None)[0]
        ref = ref if u > 0 else -ref
        assert loss_value(loss, u) == pytest.approx(ref, abs=1e-10)


@given(st.floats(-20, 20), st.floats(0.01, 0.99))
def test_quantile_loss_exact_closed_form(u, alpha):
    loss = loss_for(build_score("quantile_step", alpha=alpha))
    assert loss_value(loss, u) == u * ((1.0 if u >= 0 else 0.0) - alpha)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(sorted(PRESET_SCORES)), st.floats(-10, 10), st.floats(-10, 10), st.floats(0.01, 0.99))
def test_loss_convexity(kind, u1, u2, lam):
    loss = loss_for(build_score(kind, **PRESET_SCORES[kind]))
    mid = loss_value(loss, lam * u1 + (1 - lam) * u2)
    chord = lam * loss_value(loss, u1) + (1 - lam) * loss_value(loss, u2)
    assert mid <= chord + 1e-9 * (1 + abs(chord))


def test_loss_convexity_random_triples():
    rng = np.random.default_rng(0)
    u1, u2 = rng.uniform(-10, 10, (2, 10_000))
    lam = rng.uniform(0, 1, 10_000)
    for kind, params in PRESET_SCORES.items():
        loss = loss_for(build_score(kind, **params))
        mid = loss_value(loss, lam * u1 + (1 - lam) * u2)
        chord = lam * loss_value(loss, u1) + (1 - lam) * loss_value(loss, u2)
        assert np.all(mid <= chord + 1e-9 * (1 + np.abs(chord))), kind


def test_custom_score_quadrature_loss():
    phi = build_score("custom", value=lambda u: math.tanh(u), sup_abs=1.0)
    loss = loss_for(phi)
    assert loss_value(loss, 1.3) == pytest.approx(math.log(math.cosh(1.3)), abs=1e-10)
    assert loss_value(loss, -0.7) == pytest.approx(math.log(math.cosh(0.7)), abs=1e-10)


def test_custom_step_left_limit():
    phi = build_score("custom", value=lambda u: 1.0 if u >= 0 else -1.0, jump_points=[0.0], sup_abs=1.0)
    assert evaluate_score(phi, 0.0, "right") == 1.0
    assert evaluate_score(phi, 0.0, "left") == -1.0
    assert evaluate_score(phi, 0.5, "left") == 1.0


def test_custom_rejects_decreasing_score():
    with pytest.raises(InvalidParameter):
        build_score("custom", value=lambda u: -u)


def test_custom_rejects_bad_origin():
    with pytest.raises(InvalidParameter):
        build_score("custom", value=lambda u: u + 1.0)


def test_custom_integration_failure():
    phi = build_score("custom", value=lambda u: math.copysign(abs(u) ** 40, u) if abs(u) < 1e3 else math.copysign(1e120, u),
                      growth=40.0)
    with pytest.raises(IntegrationFailure):
        loss_value(loss_for(phi), 1e300)
