import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gexpect import DomainError, MeasureFamily, random_family, rvf, sequence_capacity
from gexpect.bounds import (bernstein_bound, certify_bernstein, combined_upper_bound,
                            exp_quadratic_value, expansion_constant, expansion_remainder,
                            heterogeneous_delta, log_exp_quadratic, log_mgf_product,
                            maximal_factor_check, maximal_shift, moment_expansion_bound,
                            eta_rate_target, counting_bound_log, proposition_bound)


def test_bernstein_closed_form():
    assert bernstein_bound(1, 2.0, 1.0, 4.0) == math.exp(-4.0 / (2 * (4.0 + 4.0)))
    shift, val = bernstein_bound(2, 2.0, 1.0, 4.0, [(0.0, 0.5)] * 3)
    assert shift == 1.0 and val == 4 * math.exp(-0.25)
    with pytest.raises(DomainError):
        bernstein_bound(2, 2.0, 1.0, 4.0)
    with pytest.raises(DomainError):
        bernstein_bound(1, 0.0, 1.0, 4.0)


def test_maximal_shift_hand_value():
    # tails of E[-Y] for k = 1..3 are 0.5, 0.2, 0; sum of E[Y] is -0.2
    assert maximal_shift([(0.1, 0.3), (-0.2, 0.3), (-0.1, 0.2)]) == pytest.approx(0.5 - 0.2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 7), st.floats(0.05, 1.5), st.sampled_from([1, 2, 3]))
def test_bernstein_never_violated(seed, n, frac, variant):
    fam = random_family(np.random.default_rng(seed))
    a = float(np.max(np.abs(fam.support)))
    rep = certify_bernstein(fam, n, frac * max(a, 1e-9) * math.sqrt(n), variant)
    assert rep.status != "VIOLATION", rep


def test_expansion_constant_and_envelope():
    assert expansion_constant(0.0, 1.0) == 1.5
    s = np.linspace(-6, 6, 2001)
    for lam, theta in ((0.5, 0.3), (1.7, 1.2), (0.0, 2.0)):
        g, env = expansion_remainder(s, lam, theta)
        assert np.all(np.abs(g) <= env + 1e-12)


def test_expansion_bound_on_centred_family():
    fam = MeasureFamily.from_lists([[(-1, 0.5), (1, 0.5)], [(-2, 0.5), (2, 0.5)]])
    up = moment_expansion_bound(fam, 0.4, 1.0, 0.3, "upper")
    lo = moment_expansion_bound(fam, 0.4, 1.0, 0.3, "lower")
    assert up.applicable and lo.applicable and up.holds and lo.holds
    shifted = MeasureFamily.from_lists([[(0.5, 1.0)]])
    assert not moment_expansion_bound(shifted, 0.4, 1.0, 0.3, "upper").applicable


def test_log_mgf_factorizes():
    fam = MeasureFamily.from_lists([[(-1, 0.3), (0.5, 0.7)], [(-2, 0.5), (1, 0.5)]])
    for lam, mu in ((0.3, 0.1), (1.2, 0.0), (0.0, 0.5)):
        assert abs(log_mgf_product([fam] * 6, lam, mu) - log_exp_quadratic([fam] * 6, lam, mu)) < 1e-12


def test_exp_quadratic_prediction_is_leading_order():
    v = exp_quadratic_value(rvf(), 16, 16 ** 0.3, 1.0, 0.2)
    assert v.log_predicted == pytest.approx((0.5 - 0.2) * 16 ** 0.6, rel=1e-14)
    assert math.isfinite(v.log_ratio)


def test_combined_bound_dominates_exact():
    for n in (4, 8, 12):
        x = n ** 0.3
        exact = sequence_capacity(lambda s, v2: s >= x * np.sqrt(v2), [rvf()] * n).upper
        ub, cells = combined_upper_bound([rvf()] * n, x)
        assert exact <= ub <= 1.0 and cells


def test_combined_bound_rate_improves_with_n():
    rates = []
    for n in (1000, 100000):
        x = n ** 0.3
        ub, _ = combined_upper_bound([rvf()] * n, x)
        rates.append(math.log(ub) / x ** 2)
    assert rates[1] < rates[0] < 0


def test_proposition_bounds():
    assert proposition_bound("Prop2", {"x": 3.0, "delta": 0.1}).log_value == -4.5
    assert not proposition_bound("Prop2", {"x": 3.0, "delta": 0.1}).hard
    assert proposition_bound("BIneq1", {"x": 2.0, "a": 1.0, "var_sum": 4.0}).hard
    with pytest.raises(DomainError):
        proposition_bound("Prop3", {"x": 2.0, "delta": 0.5, "r_squared": 4.0})
    with pytest.raises(DomainError):
        proposition_bound("Prop6.1-second", {"x": 1.5})
    with pytest.raises(DomainError):
        proposition_bound("nope", {})
    assert eta_rate_target(0.5) == -0.6328125
    with pytest.raises(DomainError):
        eta_rate_target(1.0)
    assert counting_bound_log(2.0) == -5.0 + 16 * math.exp(5) / 14400


def test_heterogeneous_delta_hand_values():
    d = heterogeneous_delta([rvf()] * 4, 4, 2.0)
    assert (d.delta, d.q) == (1.0, 4.0)
    assert heterogeneous_delta([rvf()] * 4, 4, 1.0).delta == 0.5


def test_maximal_factor_rvf():
    for n in (1, 3, 6):
        chk = maximal_factor_check(rvf(), n, 1.0)
        assert chk.holds and chk.lhs >= chk.rhs
    with pytest.raises(DomainError):
        maximal_factor_check(rvf(), 2, 0.0)
