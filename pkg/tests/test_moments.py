import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gexpect import DomainError, MeasureFamily, random_family, rvf
from gexpect.moments import (MomentProfile, condition_diagnostics, default_grid, slow_variation,
                             solve_zn, solve_zn_bisect, truncated_moment)


def test_rvf_truncated_moments():
    p = MomentProfile(rvf())
    assert p.l(0.5) == 0.25
    assert truncated_moment(p, 3.0, "upper") == 4.0
    assert truncated_moment(p, 3.0, "conjugate") == 1.0


def test_rvf_zn_hand_value():
    # n l(z) = x^2 z^2 with l = 4 beyond the support: z = sqrt(4 n) / x
    tp = solve_zn(MomentProfile(rvf()), 100, 2.0)
    assert tp.z_n == 10.0 and not tp.flagged


def test_degenerate_family_flagged():
    fam = MeasureFamily.from_lists([[(0.0, 1.0)]])
    tp = solve_zn(MomentProfile(fam), 10, 1.0)
    assert tp.z_n == 1.0 and tp.flagged


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 500), st.floats(0.5, 5.0))
def test_zn_exact_matches_bisection(seed, n, x):
    fam = random_family(np.random.default_rng(seed))
    prof = MomentProfile(fam)
    tp = solve_zn(prof, n, x)
    if tp.flagged:
        return
    ref = solve_zn_bisect(prof, n, x)
    assert abs(tp.z_n - ref) <= 1e-9 * max(1.0, ref)


def test_condition_report_for_rvf():
    fam = rvf()
    rep = condition_diagnostics(MomentProfile(fam), default_grid(fam))
    assert rep.failing() == []
    assert rep.r_squared == pytest.approx(4.0)


def test_condition_report_flags_positive_mean():
    fam = MeasureFamily.from_lists([[(-1, 0.3), (1, 0.7)]])
    rep = condition_diagnostics(MomentProfile(fam), default_grid(fam))
    assert any("mean" in f for f in rep.failing())


def test_bad_grid_rejected():
    with pytest.raises(DomainError):
        condition_diagnostics(MomentProfile(rvf()), [1.0, 0.5])


def test_slow_variation_beyond_support():
    assert slow_variation(MomentProfile(rvf()), 3.0, 2.0) == 1.0
    assert math.isfinite(slow_variation(MomentProfile(rvf()), 0.5, 2.0))
