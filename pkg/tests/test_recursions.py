import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amlab.recursions import (direct_expectation_series, dip_profile, expectation_series,
                              fixed_point, fixed_point_terms, g_map, g_series,
                              growth_bound_check, tail_increasing_index)
from amlab.schedules import make_power_schedule

ONE_OVER_N = make_power_schedule(1, 1)


def test_second_index_by_hand():
    for sc in (ONE_OVER_N, make_power_schedule(0.5, 0.6)):
        ser = expectation_series(1.0, sc, 0.0, 1.0, 10)
        assert ser.a(2) == 1.0
        # b_2 = (1 - eta_2) b_1 + eta_2 a_2 = 1
        assert math.isclose(ser.b(2), 1.0, rel_tol=1e-15)


def test_initial_scale_is_carried():
    a = expectation_series(0.7, ONE_OVER_N, 0.0, 1.0, 500)
    b = expectation_series(0.7, ONE_OVER_N, 0.0, 3.0, 500)
    np.testing.assert_allclose(b.log_b - a.log_b, math.log(3.0), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(0.01, 1.0), c=st.floats(0.05, 1.0), gamma=st.floats(0.51, 1.0),
       a1=st.floats(0.0, 5.0), b1=st.floats(0.1, 5.0))
def test_log_form_matches_plain_recursion(theta, c, gamma, a1, b1):
    sc = make_power_schedule(c, gamma)
    ser = expectation_series(theta, sc, a1, b1, 1000)
    a, b = direct_expectation_series(theta, sc, a1, b1, 1000)
    np.testing.assert_allclose(np.exp(ser.log_b), b, rtol=1e-10)
    np.testing.assert_allclose(ser.ratio * np.exp(ser.log_b), a, rtol=1e-10, atol=1e-300)


@pytest.mark.parametrize("theta,gamma", [(0.3, 1.0), (1.0, 0.7), (0.05, 0.9)])
def test_single_sequence_form(theta, gamma):
    sc = make_power_schedule(1, gamma)
    _, b = direct_expectation_series(theta, sc, 0.0, 1.0, 1001)
    for n in range(3, 1000):
        en, en1 = sc.weight(n), sc.weight(n + 1)
        # b is 0-based here: b[n - 1] is b_n
        lhs = b[n] - b[n - 1]
        rhs = (en1 / en) * (1 - en) ** 3 * (b[n - 1] - b[n - 2]) + en1 * ((1 - en) ** 2 - 1 + theta ** 2) * b[n - 1]
        assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-12 * b[n - 1])


def test_ratio_non_negative_and_log_finite():
    ser = expectation_series(1.0, ONE_OVER_N, 0.0, 1.0, 1_000_000)
    assert np.all(ser.ratio >= 0)
    assert np.all(np.isfinite(ser.log_b))
    assert ser.log_b[-1] > 709  # far beyond double range for b itself


def test_theta_at_least_one_increases_from_two():
    for theta in (1.0, 1.5):
        for sc in (ONE_OVER_N, make_power_schedule(0.7, 0.6)):
            lb = expectation_series(theta, sc, 0.0, 1.0, 20_000).log_b
            assert np.all(np.diff(lb[1:]) > 0)


@pytest.mark.parametrize("theta,gamma", [(0.01, 1.0), (0.1, 0.8), (0.5, 0.6), (2.0, 1.0)])
def test_tail_eventually_increasing(theta, gamma):
    ser = expectation_series(theta, make_power_schedule(1, gamma), 0.0, 1.0, 2_000_000)
    assert tail_increasing_index(ser) is not None


def test_dip_examples():
    assert dip_profile(2.0, ONE_OVER_N, N=10_000).argmin_index == 1
    assert dip_profile(0.01, ONE_OVER_N, N=10_000).first_exceed_index is None


def test_dip_regression_values():
    prof = dip_profile(0.01, ONE_OVER_N, 0.0, 1.0, 2_000_000)
    assert prof.argmin_index == 27652
    assert prof.first_exceed_index == 830973
    assert prof.min_value < 1.0


def test_growth_bound_examples():
    ser = expectation_series(0.5, ONE_OVER_N, 0.0, 1.0, 110_001)
    assert growth_bound_check(ser, 1.1, 100_000, 10_000).passed
    one = growth_bound_check(ser, 1.1, 100_000, 1)
    assert 1 / 1.1 <= one.normalized <= 1.1
    small = growth_bound_check(ser, 1.000001, 10, 1)
    assert not small.passed  # the sandwich is asymptotic only
    with pytest.raises(ValueError):
        growth_bound_check(ser, 1.0, 10, 1)
    with pytest.raises(ValueError):
        growth_bound_check(ser, 1.1, 110_000, 10)


@pytest.mark.parametrize("n", [10, 1000, 100_000])
def test_fixed_point_property(n):
    x = fixed_point(n, 1.0, ONE_OVER_N)
    assert abs(g_map(n, x, 1.0, ONE_OVER_N) - x) <= 1e-12 * x


def test_fixed_point_is_root_of_quadratic():
    sc = make_power_schedule(1, 0.7)
    for n in (5, 500, 50_000):
        xi, mu = fixed_point_terms(n, 0.5, sc)
        x = fixed_point(n, 0.5, sc)
        assert abs(x * x + xi * x - mu / 4) <= 1e-12 * max(1.0, mu)


def test_mu_limit():
    for tt in (0.5, 2.0):
        _, mu = fixed_point_terms(1_000_000, tt, make_power_schedule(1, 0.7))
        assert abs(mu / (4 * tt * tt) - 1) <= 1e-3


def test_fixed_points_approach_theta_tilde():
    sc = make_power_schedule(1, 0.7)
    for tt in (0.5, 1.0, 2.0):
        gaps = [abs(fixed_point(n, tt, sc) - tt) for n in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        # the gap shrinks like sqrt(eta_n): the normalized gap settles to a constant
        ratios = [g / math.sqrt(sc.weight(n)) for g, n in zip(gaps, (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6))]
        assert 0.2 < ratios[-1] < 2.0
        assert abs(ratios[-1] / ratios[-2] - 1) < 0.05
    assert abs(fixed_point(10 ** 6, 2.0, sc) - 2.0) <= 1e-2


@pytest.mark.xfail(strict=True, reason="x*_n - theta_tilde decays like sqrt(eta_n); for "
                   "theta_tilde=0.5 and eta=n^-0.7 the gap at n=1e6 is about 0.0108; "
                   "see decisions ledger")
def test_fixed_point_within_1e2_at_1e6_for_half():
    assert abs(fixed_point(10 ** 6, 0.5, make_power_schedule(1, 0.7)) - 0.5) <= 1e-2


def test_g_series_forgets_initial_value():
    sc = make_power_schedule(1, 0.7)
    a = g_series(1.0, sc, 0.0, 1, 100_000)
    b = g_series(1.0, sc, 1e6, 1, 100_000)
    assert abs(a.g[-1] - b.g[-1]) <= 1e-12
    # g tracks the moving fixed point much more closely than it approaches the limit
    assert abs(a.g[-1] - a.fixed_points[-1]) < 0.1 * abs(a.g[-1] - 1.0)


def test_g_series_one_over_n():
    gs = g_series(2.0, ONE_OVER_N, 0.0, 1, 1_000_000, with_fixed_points=False)
    assert abs(gs.g[-1] - 2.0) <= 1e-3


def test_g_series_matches_map():
    sc = make_power_schedule(1, 0.8)
    gs = g_series(0.8, sc, 0.3, 4, 60)
    x = 0.3
    for n in range(5, 61):
        x = g_map(n, x, 0.8, sc)
        assert math.isclose(gs.at(n), x, rel_tol=1e-13)


@pytest.mark.xfail(strict=True, reason="|g_N - theta_tilde| is of order sqrt(eta_N): about "
                   "0.018 for theta_tilde=1, eta=n^-0.7, N=1e5; see decisions ledger")
def test_g_within_1e3_at_1e5_for_power_07():
    gs = g_series(1.0, make_power_schedule(1, 0.7), 0.0, 1, 100_000, with_fixed_points=False)
    assert abs(gs.g[-1] - 1.0) <= 1e-3


@settings(max_examples=30, deadline=None)
@given(tt=st.floats(0.05, 5.0), gamma=st.floats(0.51, 1.0), g0=st.floats(0.0, 1e6))
def test_g_non_negative(tt, gamma, g0):
    gs = g_series(tt, make_power_schedule(1, gamma), g0, 1, 2000, with_fixed_points=False)
    assert np.all(gs.g >= 0)


def test_csv_outputs(tmp_path):
    ser = expectation_series(0.5, ONE_OVER_N, 0.0, 1.0, 20)
    ser.write_csv(tmp_path / "e.csv", comment="config_digest=x")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[1] == "n,log_b,ratio"
    assert len(lines) == 22
    n, lb, r = lines[-1].split(",")
    assert int(n) == 20 and float(lb) == ser.log_b[-1] and float(r) == ser.ratio[-1]
