import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from supremal.distributions import order_index
from supremal.errors import InvalidParameter, NoSignChange
from supremal.estimator import (
    Sample,
    argmin_extremes,
    empirical_criterion,
    empirical_derivative,
    sequential_argmins,
)
from supremal.scores import ScoreKind, build_score, loss_for

from conftest import PRESET_SCORES, all_preset_losses

IDENTITY = loss_for(build_score("identity"))
MEDIAN = loss_for(build_score("quantile_step", alpha=0.5))

samples = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=25)


def grid_minimizers(values, loss, step=1e-4):
    """Brute force: near-minimal points of M_n on a fine grid."""
    x = np.asarray(values)
    t = np.arange(x.min() - 1.0, x.max() + 1.0 + step, step)
    M = np.zeros_like(t)
    for xi in x:
        M += loss.v(t - xi) - loss.v(-xi)
    M /= x.size
    near = t[M <= M.min() + 1e-12 * (1.0 + abs(M.min()))]
    return near.min(), near.max()


def test_empirical_criterion_examples():
    assert empirical_criterion([1.0], IDENTITY, 1.0) == -0.5
    assert empirical_criterion([0.0, 2.0], MEDIAN, 1.0) == 0.0
    for loss in all_preset_losses():
        assert empirical_criterion([0.3, -1.2, 4.0], loss, 0.0) == 0.0


def test_empirical_derivative_examples():
    s = Sample([1.0, 2.0, 3.0])
    assert empirical_derivative(s, MEDIAN, 2.0, "right") == pytest.approx(1 / 6, abs=1e-15)
    assert empirical_derivative(s, MEDIAN, 2.0, "left") == pytest.approx(-1 / 6, abs=1e-15)
    assert empirical_derivative(s, IDENTITY, 2.0) == 0.0


def test_argmin_examples():
    assert argmin_extremes([3.0, 1.0, 2.0], MEDIAN).smallest == 2.0
    pair = argmin_extremes([1.0, 2.0, 3.0], IDENTITY)
    assert pair.smallest == pair.largest == 2.0
    third = loss_for(build_score("quantile_step", alpha=1 / 3))
    pair = argmin_extremes([1.0, 2.0, 3.0], third)
    assert (pair.smallest, pair.largest) == (1.0, 2.0)


def test_sequential_examples():
    assert list(sequential_argmins([1.0, 2.0, 3.0], IDENTITY)) == [1.0, 1.5, 2.0]
    assert list(sequential_argmins([3.0, 1.0, 2.0], MEDIAN, start=2)) == [1.0, 2.0]
    for loss in all_preset_losses():
        assert sequential_argmins([5.0], loss)[0] == pytest.approx(5.0, abs=1e-11)


def test_sequential_bad_start():
    with pytest.raises(InvalidParameter):
        sequential_argmins([1.0, 2.0], IDENTITY, start=3)


def test_degenerate_score_has_no_sign_change():
    flat = loss_for(build_score("custom", value=lambda u: 0.0, sup_abs=1.0))
    with pytest.raises(NoSignChange):
        argmin_extremes([0.0, 1.0], flat)


@pytest.mark.parametrize("loss", all_preset_losses(), ids=lambda l: l.score.kind.value)
def test_argmin_matches_grid_scan(loss):
    rng = np.random.default_rng(5)
    for _ in range(15):
        n = int(rng.integers(1, 26))
        x = np.round(rng.uniform(-5, 5, n), 1)
        pair = argmin_extremes(x, loss)
        lo, hi = grid_minimizers(x, loss)
        assert pair.smallest == pytest.approx(lo, abs=2e-4)
        assert pair.largest == pytest.approx(hi, abs=2e-4)


@settings(max_examples=200)
@given(samples, st.floats(0.01, 0.99))
def test_quantile_smallest_is_order_statistic(values, alpha):
    loss = loss_for(build_score("quantile_step", alpha=alpha))
    x = np.sort(values)
    assert argmin_extremes(values, loss).smallest == x[order_index(x.size, alpha) - 1]


@settings(max_examples=100, deadline=None)
@given(samples, st.sampled_from(sorted(PRESET_SCORES)))
def test_argmin_pair_certificate(values, kind):
    loss = loss_for(build_score(kind, **PRESET_SCORES[kind]))
    s = Sample(values)
    pair = argmin_extremes(s, loss)
    assert pair.smallest <= pair.largest
    scale = max(1.0, abs(pair.smallest))
    if loss.score.kind in (ScoreKind.QUANTILE_STEP, ScoreKind.IDENTITY):
        assert empirical_derivative(s, loss, pair.smallest) >= -1e-12
        assert empirical_derivative(s, loss, pair.largest, "left") <= 1e-12
    else:
        assert empirical_derivative(s, loss, pair.smallest + 1e-9 * scale) >= 0
        assert empirical_derivative(s, loss, pair.largest - 1e-9 * scale, "left") <= 0
    assert empirical_derivative(s, loss, pair.smallest - 1e-9 * scale) < 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40),
       st.sampled_from(["identity", "quantile_step"]))
def test_sequential_bit_identical_for_exact_scores(values, kind):
    loss = loss_for(build_score(kind, **PRESET_SCORES[kind]))
    seq = sequential_argmins(values, loss)
    fresh = [argmin_extremes(values[:k], loss).smallest for k in range(1, len(values) + 1)]
    assert np.asarray(fresh).tobytes() == seq.tobytes()


@pytest.mark.parametrize("kind", ["huber", "smoothed_median", "normal_cdf_shift", "cauchy_cdf_shift", "rational_sqrt"])
def test_sequential_matches_fresh_for_smooth_scores(kind):
    loss = loss_for(build_score(kind, **PRESET_SCORES[kind]))
    x = np.random.default_rng(3).normal(size=60)
    seq = sequential_argmins(x, loss, start=3)
    fresh = np.array([argmin_extremes(x[:k], loss).smallest for k in range(3, 61)])
    assert np.max(np.abs(seq - fresh)) <= 1e-10


def test_sorted_view_is_permutation():
    s = Sample([3.0, -1.0, 3.0, 0.5])
    assert list(s.sorted_view) == [-1.0, 0.5, 3.0, 3.0]
    assert len(s) == 4
    with pytest.raises(InvalidParameter):
        Sample([])
