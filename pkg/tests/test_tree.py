import math

import numpy as np
import pytest

import oracles
from gexpect import (AdversarialTree, MeasureFamily, ResourceError, StateDP, iid_sequence_value,
                     rvf, sequence_capacity, sum_sq_dp)


def test_worked_value_two_steps():
    assert sequence_capacity(lambda s, v2: s >= np.sqrt(v2), [rvf()] * 2).upper == 0.25


def test_rvf_eight_steps_matches_oracle():
    # value from the pure-Python nested recursion over 4^8 histories
    x = 8 ** 0.3
    assert sequence_capacity(lambda s, v2: s >= x * np.sqrt(v2), [rvf()] * 8).upper == 0.046875


def test_tree_and_state_dp_agree():
    fam = MeasureFamily.from_lists([[(-1, 0.5), (0.5, 0.5)], [(-0.5, 0.3), (1, 0.7)]])
    pay_sv = lambda s, v2: np.exp(0.4 * s - 0.1 * v2)  # noqa: E731
    tree = iid_sequence_value(lambda p: pay_sv(p.sum(1), (p * p).sum(1)), fam, 5)
    dp = iid_sequence_value(pay_sv, fam, 5, statistic="sum_sq")
    assert abs(tree - dp) < 1e-13


def test_non_symmetric_independence_order_matters():
    # X * Y^2 with X = +-1 fixed and Y volatility-uncertain: Y after X sees the sign of X
    x = MeasureFamily.from_lists([[(-1, 0.5), (1, 0.5)]])
    pay = lambda p: p[:, 0] * p[:, 1] ** 2  # noqa: E731
    xy = AdversarialTree([x, rvf()], pay).solve()
    yx = AdversarialTree([rvf(), x], lambda p: pay(p[:, ::-1])).solve()
    laws = [oracles.family_laws(x), oracles.family_laws(rvf())]
    assert xy == oracles.nested_value(laws, lambda t: t[0] * t[1] ** 2) == 1.5
    assert yx == 0.0


def test_log_space_matches_linear():
    fam = rvf()
    dp = sum_sq_dp([fam] * 6)
    s, v2 = dp.terminal
    lin = dp.value(np.exp(0.3 * s - 0.05 * v2))
    log = dp.value(0.3 * s - 0.05 * v2, log_space=True)
    assert abs(math.log(lin) - log) < 1e-13


def test_fixed_policy_of_optimum_reproduces_value():
    fam = MeasureFamily.from_lists([[(-1, 0.4), (2, 0.6)], [(-1, 0.7), (2, 0.3)]])
    dp = sum_sq_dp([fam] * 4)
    s, v2 = dp.terminal
    vals = (s >= 1.0).astype(float)
    v, pol = dp.value(vals, policy=True)
    assert dp.fixed_policy_value(vals, pol) == v
    assert dp.fixed_policy_value(vals, [np.zeros_like(c) for c in pol]) <= v


def test_state_budget_enforced():
    fam = MeasureFamily.from_lists([[(v, 0.2) for v in (-1.1, -0.3, 0.7, 1.9, 2.3)]])
    with pytest.raises(ResourceError):
        StateDP([fam] * 8, (0.0, 0.0), lambda c, a: (c[0] + a, c[1] + a * a), max_states=1000)
    with pytest.raises(ResourceError):
        AdversarialTree([fam] * 12, lambda p: p.sum(1)).solve()


def test_sequence_capacity_lower_le_upper():
    cap = sequence_capacity(lambda s, v2: s >= 0.5 * np.sqrt(v2), [rvf()] * 5)
    assert 0 <= cap.lower <= cap.upper <= 1
