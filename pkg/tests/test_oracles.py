import numpy as np
import pytest

from liqpde.oracles import (
    constant_coefficient_value,
    coth_value,
    separable_value,
    terminal_envelope,
    twap_cost,
)


def test_separable_value():
    assert separable_value(1.0, 2.0, 0.5) == pytest.approx(2.0)
    assert separable_value(2.0, 3.0, 0.25) == pytest.approx(2.0 / 0.25**2)


def test_coth_value():
    assert coth_value(1.0) == pytest.approx(1.313035, rel=1e-6)


def test_ode_reproduces_coth():
    taus = np.array([0.1, 0.5, 1.0])
    assert constant_coefficient_value(1.0, 0.0, 1.0, 0.0, 2.0, taus) == pytest.approx(
        coth_value(taus), rel=1e-7
    )


def test_ode_reproduces_separable():
    assert constant_coefficient_value(1.0, 0.0, 0.0, 0.0, 1.6, 0.7) == pytest.approx(
        separable_value(1.0, 1.6, 0.7), rel=1e-8
    )


def test_ode_scalar_input():
    value = constant_coefficient_value(1.0, 1.0, 1.0, 2.0, 2.0, 1.0)
    assert np.ndim(value) == 0
    assert np.isfinite(value)


def test_ode_dark_pool_lowers_value():
    # a dark pool can only reduce the cost of liquidation
    with_pool = constant_coefficient_value(1.0, 1.0, 1.0, 2.0, 2.0, 1.0)
    assert with_pool < coth_value(1.0)


def test_ode_rejects_tiny_tau():
    with pytest.raises(ValueError, match="Oracle needs tau"):
        constant_coefficient_value(1.0, 0.0, 1.0, 0.0, 2.0, 1e-9)


def test_twap_cost():
    assert twap_cost(1.0, 1.0, 2.0, 1.0, 1.0) == pytest.approx(4.0 / 3.0)
    assert twap_cost(1.0, 0.0, 2.0, 2.0, -3.0) == pytest.approx(4.5)


def test_twap_gap_over_optimal():
    assert twap_cost(1.0, 1.0, 2.0, 1.0, 1.0) - coth_value(1.0) == pytest.approx(0.0203, abs=1e-4)


def test_terminal_envelope_brackets_coth(coth_problem):
    taus = np.array([0.01, 0.1, 0.5, 1.0])
    lower, upper = terminal_envelope(coth_problem, taus, 0.0)
    assert np.all(lower <= coth_value(taus))
    assert np.all(coth_value(taus) <= upper)


def test_terminal_envelope_range(logistic_problem):
    limit = min(1.0, logistic_problem.costs.kappa0 / logistic_problem.costs.op_eta_bound)
    with pytest.raises(ValueError, match="Envelope holds"):
        terminal_envelope(logistic_problem, 0.0, 0.0)
    with pytest.raises(ValueError, match="Envelope holds"):
        terminal_envelope(logistic_problem, 1.5 * limit, 0.0)
