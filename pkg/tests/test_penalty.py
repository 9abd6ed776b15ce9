import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasisparse import penalty
from quasisparse.errors import DomainError, ParameterError
from quasisparse.penalty import (
    PenaltyParams,
    Regime,
    g_function,
    prox_scalar,
    prox_vector,
    rho,
    scalar_objective,
    threshold_value,
)
from quasisparse.validation import grid_argmin

# expected values below come from grid_argmin refined to a 5e-11 step
G_A1_L025_AT2 = 1.98598038
PROX_A3_L05_AT12 = 1.16276977


def test_rho_values():
    assert rho(1, 0) == 0
    assert rho(1, 1) == 0.5
    assert rho(1000, 0.5) == pytest.approx(0.998004, abs=1e-6)
    assert rho(1000, 0.5) == pytest.approx(500 / 501, rel=1e-15)


def test_rho_rejects_nonpositive_a():
    with pytest.raises(ParameterError):
        rho(0, 1.0)
    with pytest.raises(ParameterError):
        penalty.penalty(-1, [1.0])


def test_rho_even_and_monotone():
    t = np.linspace(0, 10, 101)
    vals = rho(2.0, t)
    assert np.all(np.diff(vals) > 0)
    np.testing.assert_array_equal(rho(2.0, -t), vals)
    assert np.all((vals >= 0) & (vals < 1))


def test_penalty_values():
    assert penalty.penalty(1, np.zeros(4)) == 0
    assert penalty.penalty(1, [1, -1, 0]) == 1.0
    assert penalty.penalty(2, [0.5, 0.25]) == pytest.approx(0.5 + 1 / 3, rel=1e-15)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(0.01, 100))
def test_penalty_bounds(x, a):
    x = np.array(x)
    val = penalty.penalty(a, x)
    assert 0 <= val < len(x)
    assert (val == 0) == (not np.any(x))


def test_params_validation():
    with pytest.raises(ParameterError):
        PenaltyParams(1.0, 0.0)
    with pytest.raises(ParameterError):
        PenaltyParams(0.0, 1.0)


@pytest.mark.parametrize(
    "a, lam, regime, t_star",
    [
        (1, 0.25, Regime.SUB_CRITICAL, 0.125),
        (1, 1, Regime.SUB_CRITICAL, 0.5),
        (2, 4, Regime.SUPER_CRITICAL, 1.75),
    ],
)
def test_threshold_value(a, lam, regime, t_star):
    tr = threshold_value(PenaltyParams(a, lam))
    assert tr.regime is regime
    assert tr.threshold == pytest.approx(t_star, abs=1e-15)


def test_threshold_boundary_formulas_agree():
    for a in (0.5, 1, 2, 5):
        lam = 1 / a**2
        assert abs(penalty.threshold_sub(a, lam) - penalty.threshold_super(a, lam)) <= 1e-12
        assert penalty.threshold_sub(a, lam) == pytest.approx(1 / (2 * a))


def test_g_function_matches_grid():
    p = PenaltyParams(1, 0.25)
    val = g_function(p, 2.0)
    assert 0 < val < 2.0
    assert val == pytest.approx(G_A1_L025_AT2, abs=1e-6)
    beta, _ = grid_argmin(1, 0.25, 2.0, step=1e-6)
    assert abs(val - beta) <= 1e-6
    assert g_function(p, -2.0) == -val


def test_g_function_at_coincident_threshold_is_zero():
    p = PenaltyParams(1, 1)
    assert float(penalty.arccos_argument(p, 0.5)) == 1.0
    assert g_function(p, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert grid_argmin(1, 1, 0.5)[0] == 0.0


def test_g_function_domain_error_below_threshold():
    p = PenaltyParams(1, 4.0)
    with pytest.raises(DomainError):
        g_function(p, 0.1)


def test_g_function_vectorized():
    p = PenaltyParams(2, 0.5)
    gam = np.array([1.0, -3.0, 4.5])
    np.testing.assert_array_equal(g_function(p, gam), [g_function(p, g) for g in gam])


def test_prox_scalar_examples():
    p = PenaltyParams(1, 0.25)
    assert prox_scalar(p, 0.1) == 0
    assert prox_scalar(p, 0.0) == 0
    assert prox_scalar(p, 0.125) == 0  # tie resolves to zero
    q = PenaltyParams(3, 0.5)
    assert threshold_value(q).regime is Regime.SUPER_CRITICAL
    assert prox_scalar(q, 1.2) == pytest.approx(PROX_A3_L05_AT12, abs=1e-5)
    assert prox_scalar(q, 1.2) == pytest.approx(grid_argmin(3, 0.5, 1.2, 1e-6)[0], abs=1e-5)


def test_prox_vector():
    p = PenaltyParams(1, 0.25)
    np.testing.assert_array_equal(prox_vector(p, np.zeros(3)), np.zeros(3))
    out = prox_vector(p, [2, -2, 0.1])
    g2 = prox_scalar(p, 2.0)
    np.testing.assert_array_equal(out, [g2, -g2, 0.0])
    q = PenaltyParams(2, 3.0)
    t = threshold_value(q).threshold
    x = np.linspace(-t, t, 17)
    np.testing.assert_array_equal(prox_vector(q, x), np.zeros_like(x))


def test_scalar_objective():
    assert scalar_objective(PenaltyParams(1, 1), 0, 0) == 0
    assert scalar_objective(PenaltyParams(1, 1), 1, 0) == 1.5
    assert scalar_objective(PenaltyParams(2, 0.5), 0.5, 1) == pytest.approx(0.5, abs=1e-15)


params = st.tuples(
    st.floats(math.log(0.1), math.log(10)).map(math.exp),
    st.floats(math.log(0.1), math.log(10)).map(math.exp),
)


@settings(max_examples=300)
@given(params, st.floats(-5, 5))
def test_prox_symmetry_and_shrinkage(al, gamma):
    p = PenaltyParams(*al)
    v = prox_scalar(p, gamma)
    assert prox_scalar(p, -gamma) == -v
    assert abs(v) <= abs(gamma)
    assert v * gamma >= 0


@settings(max_examples=300)
@given(params, st.floats(0, 1))
def test_prox_threshold_split(al, frac):
    p = PenaltyParams(*al)
    t = threshold_value(p).threshold
    assert prox_scalar(p, frac * t) == 0
    assert prox_scalar(p, t + 1e-9 + frac) != 0


@settings(max_examples=300)
@given(params, st.floats(0, 5))
def test_arccos_argument_in_range(al, extra):
    p = PenaltyParams(*al)
    t = threshold_value(p).threshold
    arg = float(penalty.arccos_argument(p, t + extra))
    assert -1 <= arg <= 1 + 1e-12


@settings(max_examples=300)
@given(params)
def test_super_threshold_not_above_sub(al):
    a, lam = al
    assert penalty.threshold_super(a, lam) <= penalty.threshold_sub(a, lam) + 1e-12


@pytest.mark.parametrize("t", [0.01, 0.5, 3.0])
def test_interpolates_l0(t):
    vals = [rho(a, t) for a in (1, 10, 1e2, 1e3, 1e4)]
    assert all(b > c for b, c in zip(vals[1:], vals[:-1]))
    for a, v in zip((1, 10, 1e2, 1e3, 1e4), vals):
        assert v >= 1 - 1 / (a * t)
    assert vals[-1] > 1 - 1 / (1e4 * t) - 1e-15
