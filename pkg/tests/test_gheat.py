import math

import numpy as np
import pytest

import oracles
from gexpect import ConfigurationError, DomainError
from gexpect.gheat import (TEST_FUNCTIONS, TEST_KINKS, GParams, GridConfig,
                           classical_normal_expectation, g_generator, gnormal_expectation,
                           solve_g_heat)


def test_generator_values():
    p = GParams(1.0, 2.0)
    assert g_generator(1.0, p) == 2.0
    assert g_generator(-1.0, p) == -0.5
    assert np.allclose(g_generator(np.array([0.0, 2.0]), p), [0.0, 4.0])


def test_params_validation():
    with pytest.raises(ConfigurationError):
        GParams(2.0, 1.0)
    with pytest.raises(ConfigurationError):
        GParams(0.0, 1.0)


def test_convex_and_concave_extremes():
    p = GParams(1.0, 2.0)
    assert abs(gnormal_expectation(lambda x: x * x, p) - 4.0) < 4e-3
    assert abs(gnormal_expectation(lambda x: -x * x, p) + 1.0) < 4e-3


def test_first_order_convergence_at_least():
    p = GParams(0.8, 1.6)
    phi = lambda x: np.sqrt(1 + x * x)  # noqa: E731
    ref = classical_normal_expectation(phi, 1.6)
    errs = [abs(gnormal_expectation(phi, p, GridConfig(level=L)) - ref) for L in (0, 1, 2, 3)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[0] / errs[3] > 8


def test_quadrature_reference_matches_trapezoid_oracle():
    for name, phi in TEST_FUNCTIONS.items():
        q = classical_normal_expectation(phi, 1.3, TEST_KINKS[name])
        t = oracles.normal_expectation_trapezoid(phi, 1.3)
        assert abs(q - t) < 1e-9, name


def test_cfl_and_domain_checks():
    p = GParams(1.0, 2.0)
    with pytest.raises(ConfigurationError):
        solve_g_heat(lambda x: x, 1.0, p, GridConfig(level=1, dt=0.01))
    with pytest.raises(ConfigurationError):
        solve_g_heat(lambda x: x, 1.0, p, GridConfig(level=1, half_width=3.0))
    with pytest.raises(DomainError):
        solve_g_heat(lambda x: x, 0.0, p)


def test_stored_times_and_semigroup():
    p = GParams(1.0, 1.5)
    phi = TEST_FUNCTIONS["hump"]
    sol = solve_g_heat(phi, 1.0, p, GridConfig(level=2, store_times=(0.5,)))
    assert list(sol.times) == [0.0, 0.5, 1.0]
    assert sol.at(0.2, 0.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        sol.at(0.0, 0.3)
    # the solution stays within the range of the data
    assert sol.values.min() >= -1e-15 and sol.values.max() <= 1 + 1e-15


def test_linear_payoff_is_invariant():
    p = GParams(0.5, 2.0)
    assert abs(gnormal_expectation(lambda x: 3 * x + 1, p) - 1.0) < 1e-12
    assert math.isclose(gnormal_expectation(lambda x: np.ones_like(x), p), 1.0)
