import numpy as np
import pytest

from gexpect import ConfigurationError, DomainError
from gexpect.paths import (NormalStream, PolicyRangeError, VolatilityPolicy, constant_policy,
                           dds_time_change_check, default_policy_grid, lil_ratios,
                           self_normalized_series, simulate_path, simulate_paths,
                           worst_case_policy_search, zero_stream)


def test_constant_policy_qv_is_deterministic():
    path = simulate_path(constant_policy(1.5), 10.0, 0.01, 0)
    assert path.qv[-1] == pytest.approx(22.5, rel=1e-12)


def test_bang_bang_schedule_qv():
    pol = VolatilityPolicy("schedule", 1.0, 2.0, schedule=(1.0, 2.0))
    assert simulate_path(pol, 10.0, 0.01, 0).qv[-1] == pytest.approx(25.0, rel=1e-12)


def test_streams_are_reproducible_and_independent():
    a = NormalStream(3).normals(1000)
    assert np.array_equal(a, NormalStream(3).normals(1000))
    assert not np.array_equal(a, NormalStream(4).normals(1000))
    assert abs(a.mean()) < 0.15 and abs(a.std() - 1) < 0.1


def test_policy_range_enforced():
    bad = VolatilityPolicy("feedback", 1.0, 2.0, rule=lambda step, w: 3.0)
    with pytest.raises(PolicyRangeError):
        simulate_path(bad, 1.0, 0.1, 0)
    with pytest.raises(ConfigurationError):
        VolatilityPolicy("constant", 1.0, 2.0)
    with pytest.raises(ConfigurationError):
        VolatilityPolicy("wobble", 1.0, 2.0, value=1.0)


def test_feedback_qv_within_bounds():
    for pol in default_policy_grid(0.5, 1.5):
        b = simulate_paths(pol, 2.0, 0.01, 1, 50)
        t = 0.01 * np.arange(1, b.qv.shape[1] + 1)
        assert np.all(b.qv >= 0.25 * t * (1 - 1e-12)) and np.all(b.qv <= 2.25 * t * (1 + 1e-12))


def test_zero_horizon_and_zero_stream():
    assert len(simulate_path(constant_policy(1.0), 0.0, 0.01, 0).increments) == 0
    path = simulate_path(constant_policy(1.0), 20.0, 0.01, 0, normals=zero_stream)
    ser = self_normalized_series(path)
    assert np.all(ser.lil_ratio == 0.0)


def test_lil_ratio_definition():
    r = lil_ratios(np.array([2.0]), np.array([4.0]), np.array([16.0]))
    assert r[0] == pytest.approx(1.0 / np.sqrt(2 * np.log(np.log(16.0))))


def test_policy_search_prefers_low_volatility_for_concave_statistic():
    res = worst_case_policy_search(lambda w: -w[:, -1] ** 2, default_policy_grid(1.0, 2.0), 2000, 1)
    assert res.best_policy.name == "const(1)"
    assert abs(res.estimate + 1.0) <= 4 * res.stderr
    assert res.lower_bound


def test_dds_report_on_bang_bang_feedback():
    pol = VolatilityPolicy("feedback", 0.5, 2.0, target=1, high_on_match=True)
    rep = dds_time_change_check(simulate_path(pol, 300.0, 0.01, 2))
    assert rep.passed and rep.n_blocks > 50
    with pytest.raises(DomainError):
        dds_time_change_check(simulate_path(pol, 0.5, 0.01, 2))
