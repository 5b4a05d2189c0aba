import math

import numpy as np
import pytest

from gexpect import MeasureFamily, rvf
from gexpect.lab import (ExperimentRefused, RateFunction, alternating_array, array_diagnostics,
                         block_ratio_check, block_schedule, conjecture_explore, eta_lower_bound,
                         fit_rate_constant, inject_index, lil_trace, md_rate_curve,
                         mk_turning_index, non_iid_experiment, large_v_remainder_trend,
                         trend_toward, x_sequence)
from gexpect.paths import constant_policy

# exact RVF capacities at x_n = n^0.3, from the state DP
RVF_RATES = {8: -0.87883200692691665, 16: -0.76303194029582999}


def test_rvf_rates_frozen():
    curve = md_rate_curve(rvf(), 0.3, [8, 16], bounds="never")
    for n, r in curve.rates():
        assert r == RVF_RATES[n]
    assert curve.rates()[0][1] == math.log(0.046875) / 8 ** 0.6


def test_refused_when_mean_positive():
    fam = MeasureFamily.from_lists([[(-1, 0.3), (1, 0.7)]])
    with pytest.raises(ExperimentRefused, match="mean"):
        md_rate_curve(fam, 0.3, [8])


def test_budget_switches_to_bounds():
    curve = md_rate_curve(rvf(), 0.3, [40], budget=2000, mc_paths=4000)
    methods = {r.method for r in curve.rows}
    assert methods == {"mc-policy-lower", "certified-upper"}
    lo = curve.by_method("mc-policy-lower")[40]
    up = curve.by_method("certified-upper")[40]
    assert lo.log_capacity <= up.log_capacity


def test_trend_helper():
    assert trend_toward([-0.9, -0.8, -0.7])
    assert trend_toward([-0.9, -0.92, -0.7], slack=0.10)
    assert not trend_toward([-0.9, -1.2])


def test_conjecture_is_labelled():
    curve = conjecture_explore(rvf(), 0.3, [8])
    assert any("no pass/fail" in n for n in curve.notes)
    assert curve.rows[0].log_capacity <= math.log(0.046875)


def test_large_v_event_empty_for_rvf():
    rows = large_v_remainder_trend(rvf(), 0.3, [8, 12])
    assert all(r[2] == -math.inf for r in rows)


def test_rate_function():
    I = RateFunction()
    assert I(3.0) == 2.0 and I(2.0) == 9 / 8
    assert RateFunction.maximizer(3.0) == 1.0
    with pytest.raises(ValueError):
        I(1.0)


def test_eta_bound_rvf():
    r = eta_lower_bound(rvf(), 16, 16 ** 0.3, 0.5)
    assert 0 < r.value <= 1 and r.target == -0.6328125


def test_schedules():
    assert block_schedule("nk", 10 ** 6).indices == (37, 2180, 421448)
    assert mk_turning_index() == 10
    assert block_schedule("mk", 10 ** 6).indices == ()
    assert block_ratio_check(constant_policy(1.0), block_schedule("mk", 10 ** 6)).decreasing is None


def test_lil_trace_shapes_and_validation():
    tr = lil_trace(constant_policy(1.0), 2000, range(2))
    assert len(tr.seeds) == 2 and 0 <= tr.fraction_in_band() <= 1
    with pytest.raises(ValueError):
        lil_trace(constant_policy(1.0), 50, range(1))


def test_lil_trace_discrete_source():
    tr = lil_trace(rvf().laws[0], 5000, range(2))
    assert all(np.isfinite(r.max_ratio) for r in tr.seeds)


def test_alternating_array_rates():
    curve = non_iid_experiment(alternating_array(rvf(), [1.0, 1.5]), 0.3, [8, 12], bounds="never")
    assert all(-1.1 < r < 0 for _, r in curve.rates())
    assert all(math.isfinite(r.delta) and r.q == 4.0 for r in curve.rows)
    assert math.isfinite(fit_rate_constant(curve))


def test_injected_index_is_flagged_or_refused():
    arr = inject_index(lambda n: [rvf()] * n, 0, lambda n: math.sqrt(n))
    assert array_diagnostics(arr(16), 16, 2.0).violated()
    curve = non_iid_experiment(arr, 0.3, [8], bounds="never")
    assert any("flagged" in n for n in curve.notes)
    wide = MeasureFamily.from_lists([[(-0.1, 0.5), (0.1, 0.5)], [(-2, 0.5), (2, 0.5)]])
    with pytest.raises(ExperimentRefused):
        non_iid_experiment(lambda n: [wide] * n, 0.3, [8], q_cap=100.0)


def test_x_sequence_presets():
    assert x_sequence(16, gamma=0.5) == 4.0
    assert x_sequence(100, "lil", b2=100.0) == pytest.approx(math.sqrt(2 * math.log(math.log(100.0))))
