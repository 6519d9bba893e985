"""Clipping, calibration, Laplace sampling, and the privacy-bound audit."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dprw.dpmech import (
    BOUND_TOL,
    PrivacyParams,
    calibrate_scale,
    clip_l1,
    log_density,
    privatize,
    run_bound_suite,
    sample_laplace,
    verify_dp_bound,
)
from dprw.numcore import Rng

# -- parameters ------------------------------------------------------------------


def test_privacy_params_validation():
    PrivacyParams(epsilon=1.0, clip_c=5.0)
    PrivacyParams(epsilon=math.inf, clip_c=5.0)
    for eps in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            PrivacyParams(epsilon=eps, clip_c=5.0)
    for clip in (0.0, -2.0, math.inf):
        with pytest.raises(ValueError):
            PrivacyParams(epsilon=1.0, clip_c=clip)


def test_non_private_flag():
    assert PrivacyParams(epsilon=math.inf, clip_c=1.0).non_private
    assert not PrivacyParams(epsilon=1000.0, clip_c=1.0).non_private


# -- clipping --------------------------------------------------------------------


def test_clip_inside_ball_is_identity():
    v = np.array([0.5, -1.0, 0.25])
    out = clip_l1(v, 2.0)
    assert np.array_equal(out, v)


def test_clip_outside_ball_lands_on_sphere_preserving_direction():
    v = np.array([3.0, -4.0, 5.0])
    out = clip_l1(v, 2.0)
    assert np.isclose(np.abs(out).sum(), 2.0)
    np.testing.assert_allclose(out / np.abs(out).sum() * 12.0, v)


def test_clip_is_idempotent():
    v = np.array([10.0, -7.0])
    once = clip_l1(v, 1.5)
    np.testing.assert_allclose(clip_l1(once, 1.5), once)


def test_clip_rejects_bad_inputs():
    with pytest.raises(ValueError):
        clip_l1(np.ones(3), 0.0)
    with pytest.raises(ValueError):
        clip_l1(np.array([1.0, np.inf]), 1.0)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=16),
    st.floats(0.1, 10.0),
)
def test_clip_property_never_exceeds_radius(values, clip_c):
    out = clip_l1(np.array(values), clip_c)
    assert np.abs(out).sum() <= clip_c + 1e-9


# -- calibration -------------------------------------------------------------------


def test_scale_is_twice_clip_over_epsilon():
    assert calibrate_scale(PrivacyParams(epsilon=10.0, clip_c=5.0)) == 1.0
    assert calibrate_scale(PrivacyParams(epsilon=1.0, clip_c=5.0)) == 10.0
    assert calibrate_scale(PrivacyParams(epsilon=math.inf, clip_c=5.0)) == 0.0


# -- sampling ----------------------------------------------------------------------


def test_laplace_zero_scale_is_exactly_zero_and_consumes_nothing():
    rng = Rng(0).derive("laplace")
    before = Rng(0).derive("laplace").random(4)
    out = sample_laplace(0.0, 8, rng)
    assert np.array_equal(out, np.zeros(8))
    np.testing.assert_array_equal(rng.random(4), before)


def test_laplace_moments_match_distribution():
    b = 2.0
    draws = sample_laplace(b, 200_000, Rng(7).derive("moments"))
    # mean 0, E|x| = b, var = 2 b^2
    assert abs(draws.mean()) < 0.02
    assert abs(np.abs(draws).mean() - b) < 0.02
    assert abs(draws.var() - 2 * b * b) < 0.15


def test_laplace_is_deterministic_per_stream():
    a = sample_laplace(1.0, 16, Rng(3).derive("s"))
    b = sample_laplace(1.0, 16, Rng(3).derive("s"))
    np.testing.assert_array_equal(a, b)


def test_laplace_rejects_bad_args():
    with pytest.raises(ValueError):
        sample_laplace(1.0, 0, Rng(0))
    with pytest.raises(ValueError):
        sample_laplace(-1.0, 4, Rng(0))


# -- privatize ----------------------------------------------------------------------


def test_privatize_non_private_is_bitwise_clip():
    params = PrivacyParams(epsilon=math.inf, clip_c=2.0)
    v = np.array([5.0, -3.0, 0.5])
    out = privatize(v, params, Rng(0).derive("p"))
    assert np.array_equal(out, clip_l1(v, 2.0))


def test_privatize_adds_noise_when_finite():
    params = PrivacyParams(epsilon=10.0, clip_c=2.0)
    v = np.array([1.0, -0.5])
    out = privatize(v, params, Rng(1).derive("p"))
    assert not np.array_equal(out, clip_l1(v, 2.0))


def test_privatize_deterministic_given_stream():
    params = PrivacyParams(epsilon=5.0, clip_c=2.0)
    v = np.array([1.0, 2.0, 3.0])
    a = privatize(v, params, Rng(11).derive("doc", 4))
    b = privatize(v, params, Rng(11).derive("doc", 4))
    np.testing.assert_array_equal(a, b)


# -- density and bound checks ---------------------------------------------------------


def test_log_density_matches_closed_form():
    # product of two Laplace(0, b) densities at |y_i - c_i| = 1 each
    val = log_density(np.array([1.0, -1.0]), np.zeros(2), b=0.5)
    expected = 2 * (-np.log(1.0) - 1.0 / 0.5)
    assert np.isclose(val, expected)
    with pytest.raises(ValueError):
        log_density(np.zeros(2), np.zeros(2), b=0.0)
    with pytest.raises(ValueError):
        log_density(np.zeros(2), np.zeros(3), b=1.0)


def test_verify_bound_accepts_clipped_rejects_unclipped():
    params = PrivacyParams(epsilon=1.0, clip_c=1.0)
    u = np.array([0.5, -0.5])
    v = np.array([-0.5, 0.5])
    check = verify_dp_bound(u, v, np.array([3.0, -3.0]), params)
    assert check.ok and abs(check.log_ratio) <= 1.0 + BOUND_TOL
    with pytest.raises(ValueError):
        verify_dp_bound(np.array([2.0, 0.0]), v, np.zeros(2), params)


def test_verify_bound_infinite_epsilon_is_vacuous():
    params = PrivacyParams(epsilon=math.inf, clip_c=1.0)
    check = verify_dp_bound(np.ones(1), -np.ones(1), np.array([99.0]), params)
    assert check.ok and check.log_ratio == 0.0


def test_worst_case_pair_reaches_epsilon_exactly():
    # antipodal points at radius C probed far along their axis: the ratio
    # is (||y+u|| - ||y-u||)/b = 2C/b = epsilon
    eps, c = 4.0, 5.0
    params = PrivacyParams(epsilon=eps, clip_c=c)
    b = calibrate_scale(params)
    u = np.array([c, 0.0])
    y = np.array([10 * c, 0.0])
    ratio = log_density(y, u, b) - log_density(y, -u, b)
    assert np.isclose(ratio, eps)


def test_bound_suite_passes_when_calibrated():
    params = PrivacyParams(epsilon=10.0, clip_c=5.0)
    report = run_bound_suite(params, dim=32, trials=4000, rng=Rng(5).derive("suite"))
    assert report.ok
    assert report.violations == 0
    assert report.max_abs_log_ratio <= 10.0 + BOUND_TOL
    assert report.tightness >= 0.99


def test_bound_suite_fails_on_miscalibrated_scale():
    # b = C/eps is the historical calibration error; worst ratio doubles
    eps, c = 10.0, 5.0
    params = PrivacyParams(epsilon=eps, clip_c=c)
    report = run_bound_suite(
        params, dim=32, trials=4000, rng=Rng(6).derive("suite"), noise_scale=c / eps
    )
    assert not report.ok
    assert report.violations > 0
    assert abs(report.max_abs_log_ratio - 2 * eps) <= 0.05 * 2 * eps


def test_bound_suite_is_deterministic():
    params = PrivacyParams(epsilon=1.0, clip_c=5.0)
    a = run_bound_suite(params, dim=16, trials=2000, rng=Rng(9).derive("suite"))
    b = run_bound_suite(params, dim=16, trials=2000, rng=Rng(9).derive("suite"))
    assert a == b


@settings(max_examples=30, deadline=None)
@given(
    eps=st.sampled_from([1000.0, 100.0, 10.0, 1.0]),
    dim=st.integers(1, 64),
    seed=st.integers(0, 1000),
)
def test_bound_holds_for_random_clipped_pairs(eps, dim, seed):
    params = PrivacyParams(epsilon=eps, clip_c=5.0)
    rng = Rng(seed).derive("prop")
    u = clip_l1(rng.derive("u").normal(0.0, 3.0, dim), 5.0)
    v = clip_l1(rng.derive("v").normal(0.0, 3.0, dim), 5.0)
    y = privatize(u, params, rng.derive("y"))
    assert verify_dp_bound(u, v, y, params).ok
