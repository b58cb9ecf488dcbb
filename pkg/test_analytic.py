"""
Tests for the closed-form double-integrator solution.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from velocity_turnpike.analytic import (
    T_MIN,
    AnalyticScenario,
    adjoint_initial_values,
    analytic_trajectory,
    combined_term_bound,
    denominator,
    evaluate_closed_form,
    exp_At,
    nu_remark,
    solve_analytic,
    state_adjoint_matrix,
    velocity_decomposition,
)
from velocity_turnpike.errors import ModelValidationError
from velocity_turnpike.model import OcpSpec, builtin_system, quadratic_cost

REFERENCE = AnalyticScenario(q0=0.0, v0=3.0, qT=5.0, vT=6.0, T=20.0)

boundary_values = st.floats(min_value=-10, max_value=10, allow_nan=False)
horizons = st.floats(min_value=0.5, max_value=40.0)


@st.composite
def scenarios(draw, T=horizons):
    return AnalyticScenario(
        q0=draw(boundary_values), v0=draw(boundary_values),
        qT=draw(boundary_values), vT=draw(boundary_values), T=draw(T),
    )


# ---------------------------------------------------------------------------
# Matrix exponential and denominator
# ---------------------------------------------------------------------------

def test_exp_At_identity_at_zero():
    np.testing.assert_array_equal(exp_At(0.0), np.eye(4))


@pytest.mark.parametrize("s, t", [(0.3, 0.7), (1.0, 2.0), (-0.5, 1.5)])
def test_exp_At_semigroup(s, t):
    np.testing.assert_allclose(exp_At(s) @ exp_At(t), exp_At(s + t), rtol=0, atol=1e-12 * math.cosh(s + t) * 10)


@pytest.mark.parametrize("t", [0.0, 0.4, 1.7, 3.0])
def test_exp_At_solves_linear_system(t):
    h = 1e-5
    derivative = (exp_At(t + h) - exp_At(t - h)) / (2 * h)
    np.testing.assert_allclose(derivative, state_adjoint_matrix() @ exp_At(t), atol=1e-8 * math.cosh(t) * 10)


def test_denominator_small_horizon_asymptotics():
    for T in (1e-3, 1e-2, 5e-2):
        assert denominator(T) == pytest.approx(-T ** 3 / 12.0, rel=1e-3 * max(1.0, 100 * T * T))


def test_denominator_continuous_across_series_switch():
    below, above = denominator(0.1 - 1e-12), denominator(0.1 + 1e-12)
    assert below == pytest.approx(above, rel=1e-9)
    T = 0.1 - 1e-12
    direct = (2.0 * (math.cosh(T) - 1.0) - T * math.sinh(T)) / math.sinh(T)
    assert below == pytest.approx(direct, rel=1e-6)


def test_denominator_large_horizon():
    assert denominator(800.0) == pytest.approx(2.0 - 800.0)


# ---------------------------------------------------------------------------
# Optimal trajectory
# ---------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(s=scenarios())
def test_boundary_conditions(s):
    q, v, _, _, _ = evaluate_closed_form(s, [0.0, s.T])
    scale = 1.0 + abs(s.q0) + abs(s.qT) + abs(s.v0) + abs(s.vT)
    np.testing.assert_allclose(q, [s.q0, s.qT], rtol=0, atol=1e-9 * scale)
    np.testing.assert_allclose(v, [s.v0, s.vT], rtol=0, atol=1e-9 * scale)


@settings(max_examples=30, deadline=None)
@given(s=scenarios(T=st.floats(min_value=0.5, max_value=15.0)), frac=st.floats(min_value=0.05, max_value=0.95))
def test_optimality_system(s, frac):
    t, h = frac * s.T, 1e-5
    q, v, u, lam_q, lam_v = (np.asarray(x) for x in evaluate_closed_form(s, [t - h, t, t + h]))
    scale = 1.0 + float(np.max(np.abs(np.concatenate([q, v, u]))))
    # q' = v, v' = u, u' = -lambda_v' = v + lambda_q
    assert (q[2] - q[0]) / (2 * h) == pytest.approx(v[1], abs=1e-6 * scale)
    assert (v[2] - v[0]) / (2 * h) == pytest.approx(u[1], abs=1e-6 * scale)
    assert (u[2] - u[0]) / (2 * h) == pytest.approx(v[1] + lam_q[1], abs=1e-6 * scale)
    np.testing.assert_array_equal(lam_v, -u)
    assert np.all(lam_q == lam_q[0])


def test_adjoint_initial_values_match_trajectory():
    lq0, lv0 = adjoint_initial_values(REFERENCE)
    _, _, u, lam_q, _ = evaluate_closed_form(REFERENCE, [0.0])
    assert lam_q[0] == lq0
    assert lv0 == pytest.approx(-u[0], rel=1e-12)


def test_reference_scenario_interior_velocity():
    lq0, _ = adjoint_initial_values(REFERENCE)
    # lambda_q = (qT - q0 - tanh(T/2)(v0 + vT)) / (2 tanh(T/2) - T)
    assert lq0 == pytest.approx(-4.0 / -18.0, rel=1e-7)
    _, v, _, _, _ = evaluate_closed_form(REFERENCE, [10.0])
    assert abs(v[0] + 2.0 / 9.0) < 1e-3


def test_no_overflow_for_long_horizons():
    s = AnalyticScenario(q0=0.0, v0=3.0, qT=5.0, vT=6.0, T=1000.0)
    q, v, u, _, _ = evaluate_closed_form(s, np.linspace(0.0, 1000.0, 2001))
    assert np.all(np.isfinite(q)) and np.all(np.isfinite(v)) and np.all(np.isfinite(u))
    assert v[0] == pytest.approx(3.0) and v[-1] == pytest.approx(6.0)


@settings(max_examples=30, deadline=None)
@given(s=scenarios(), shift=st.floats(min_value=-100, max_value=100))
def test_translation_invariance(s, shift):
    moved = AnalyticScenario(q0=s.q0 + shift, v0=s.v0, qT=s.qT + shift, vT=s.vT, T=s.T)
    grid = np.linspace(0.0, s.T, 17)
    q_a, v_a, _, _, _ = evaluate_closed_form(s, grid)
    q_b, v_b, _, _, _ = evaluate_closed_form(moved, grid)
    np.testing.assert_allclose(v_b, v_a, rtol=0, atol=1e-9)
    np.testing.assert_allclose(q_b - q_a, shift, rtol=0, atol=1e-8 * (1.0 + abs(shift)))


# ---------------------------------------------------------------------------
# Velocity decomposition
# ---------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(s=scenarios())
def test_decomposition_identities(s):
    grid = np.linspace(0.0, s.T, 41)
    d = velocity_decomposition(s, grid)
    _, v, _, _, _ = evaluate_closed_form(s, grid)
    scale = 1.0 + float(np.max(np.abs(v)))
    np.testing.assert_allclose(d.total, v, rtol=0, atol=1e-10 * scale)
    np.testing.assert_allclose(d.arc_term + d.combined_term, v, rtol=0, atol=1e-10 * scale)
    np.testing.assert_allclose(d.boundary_term + d.coupling_term, d.combined_term, rtol=0, atol=1e-10 * scale)


def test_bracket_at_midpoint():
    d = velocity_decomposition(REFERENCE, [10.0])
    assert d.bracket[0] == pytest.approx(1.0 / math.cosh(10.0) - 1.0, rel=1e-12)


def test_bracket_vanishes_at_ends():
    d = velocity_decomposition(REFERENCE, [0.0, 20.0])
    np.testing.assert_allclose(d.bracket, 0.0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(s=scenarios(T=st.floats(min_value=10.0, max_value=200.0)))
def test_combined_term_bound(s):
    d = velocity_decomposition(s, np.linspace(0.0, s.T, 201))
    assert np.max(np.abs(d.combined_term)) <= combined_term_bound(s) + 1e-12


# ---------------------------------------------------------------------------
# Validation and wrappers
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("T", [0.0, T_MIN / 2, -1.0, float("nan")])
def test_rejects_short_or_invalid_horizon(T):
    with pytest.raises(ModelValidationError):
        AnalyticScenario(q0=0.0, v0=0.0, qT=0.0, vT=0.0, T=T)


def test_rejects_grid_outside_horizon():
    with pytest.raises(ModelValidationError):
        evaluate_closed_form(REFERENCE, [-1.0, 5.0])


def test_solve_analytic_on_spec_grid():
    spec = OcpSpec(
        system=builtin_system("double_integrator"), cost=quadratic_cost(1.0, 1.0),
        T=20.0, q0=0.0, v0=3.0, qT=5.0, vT=6.0, N=400,
    )
    traj = solve_analytic(spec)
    assert traj.method == "analytic"
    assert traj.t.size == 401
    assert traj.diagnostics["lambda_q0"] == pytest.approx(adjoint_initial_values(REFERENCE)[0])
    assert traj.objective > 0.0
    assert traj.diagnostics["decomposition"].t.size == 401


def test_from_spec_requires_reference_problem():
    spec = OcpSpec(
        system=builtin_system("double_integrator"), cost=quadratic_cost(2.0, 1.0),
        T=5.0, q0=0.0, v0=0.0, qT=1.0, vT=0.0, N=10,
    )
    with pytest.raises(ModelValidationError):
        AnalyticScenario.from_spec(spec)


def test_analytic_trajectory_has_adjoints():
    traj = analytic_trajectory(REFERENCE, np.linspace(0.0, 20.0, 5))
    assert traj.has_adjoints
    np.testing.assert_allclose(traj.lambda_v[:, 0], -traj.u[:, 0])


def test_nu_remark():
    assert nu_remark(0.0, 10.0, 3.0) == math.inf
    assert nu_remark(1.0, 10.0, 3.0) == 10.0
    assert nu_remark(10.0, 10.0, 3.0) == 6.0
    np.testing.assert_allclose(nu_remark([0.5, 2.0], 4.0, 1.0), [8.0, 2.0])
    with pytest.raises(ModelValidationError):
        nu_remark(-1.0, 1.0, 1.0)
