"""
Tests for trims and the optimal velocity steady state.
"""

import numpy as np
import pytest

from velocity_turnpike.errors import ConvergenceError, ModelValidationError
from velocity_turnpike.model import builtin_system, expr_cost, expr_system, quadratic_cost, scaled_cost
from velocity_turnpike.steady import (
    SteadyStateProblem,
    default_guesses,
    find_trim,
    kkt_residual,
    multi_start,
    reduced_hessian_eigenvalues,
    solve_velocity_steady_state,
    trim_trajectory,
)


@pytest.fixture
def damped_problem():
    return SteadyStateProblem(
        system=builtin_system("damped_integrator", c=0.5),
        cost=quadratic_cost(1.0, 1.0, v_ref=2.0),
        v_guess=[1.0],
    )


# ---------------------------------------------------------------------------
# find_trim
# ---------------------------------------------------------------------------

def test_find_trim_damped():
    trim = find_trim(builtin_system("damped_integrator", c=0.5), [2.0])
    np.testing.assert_allclose(trim.u_bar, [1.0], atol=1e-12)


def test_find_trim_records_cost():
    trim = find_trim(builtin_system("double_integrator"), [3.0], cost=quadratic_cost(1.0, 1.0))
    assert trim.u_bar[0] == 0.0
    assert trim.cost_value == pytest.approx(4.5)


def test_find_trim_underdetermined_least_squares():
    system = expr_system(["u[0] + u[1] - v[0]"], m=2)
    trim = find_trim(system, [1.0])
    assert abs(system.f(trim.v_bar, trim.u_bar)[0]) <= 1e-10
    np.testing.assert_allclose(trim.u_bar, [0.5, 0.5], atol=1e-10)


def test_find_trim_without_root():
    system = expr_system(["u[0]^2 + 1 + v[0]^2"], m=1)
    with pytest.raises(ConvergenceError):
        find_trim(system, [0.0])


# ---------------------------------------------------------------------------
# Steady state
# ---------------------------------------------------------------------------

def test_double_integrator_steady_state_is_origin():
    p = SteadyStateProblem(builtin_system("double_integrator"), quadratic_cost(1.0, 1.0), v_guess=[2.0])
    trim = solve_velocity_steady_state(p)
    np.testing.assert_allclose(trim.v_bar, [0.0], atol=1e-10)
    np.testing.assert_allclose(trim.u_bar, [0.0], atol=1e-10)
    np.testing.assert_allclose(trim.lambda_bar, [0.0], atol=1e-10)
    assert trim.kkt_residual <= 1e-10
    assert trim.is_minimizer
    np.testing.assert_allclose(trim.reduced_hessian_eigenvalues, [1.0], atol=1e-8)


def test_damped_steady_state(damped_problem):
    trim = solve_velocity_steady_state(damped_problem)
    np.testing.assert_allclose(trim.v_bar, [1.6], atol=1e-10)
    np.testing.assert_allclose(trim.u_bar, [0.8], atol=1e-10)
    np.testing.assert_allclose(trim.lambda_bar, [-0.8], atol=1e-10)
    assert trim.cost_value == pytest.approx(0.4)
    assert trim.is_minimizer
    assert np.max(np.abs(kkt_residual(damped_problem.system, damped_problem.cost,
                                      trim.v_bar, trim.u_bar, trim.lambda_bar))) <= 1e-10


def _grid_argmin(fn, lo, hi, points=100_001):
    grid = np.linspace(lo, hi, points)
    return grid[np.argmin(fn(grid))]


def test_damped_steady_state_matches_grid_search(damped_problem):
    # on the trim set u = c v the cost is a function of v alone
    c = 0.5
    restricted = lambda v: 0.5 * ((v - 2.0) ** 2 + (c * v) ** 2)
    coarse = _grid_argmin(restricted, -5.0, 5.0)
    fine = _grid_argmin(restricted, coarse - 1e-4, coarse + 1e-4)
    trim = solve_velocity_steady_state(damped_problem)
    assert trim.v_bar[0] == pytest.approx(fine, abs=1e-6)
    assert trim.u_bar[0] == pytest.approx(c * fine, abs=1e-6)


def test_scaled_cost_keeps_the_trim(damped_problem):
    base = solve_velocity_steady_state(damped_problem)
    scaled = solve_velocity_steady_state(
        SteadyStateProblem(damped_problem.system, scaled_cost(damped_problem.cost, 3.0), v_guess=[1.0])
    )
    np.testing.assert_allclose(scaled.v_bar, base.v_bar, atol=1e-10)
    np.testing.assert_allclose(scaled.u_bar, base.u_bar, atol=1e-10)
    np.testing.assert_allclose(scaled.lambda_bar, 3.0 * base.lambda_bar, atol=1e-9)


def test_guess_dimension_checked():
    with pytest.raises(ModelValidationError):
        SteadyStateProblem(builtin_system("double_integrator"), quadratic_cost(1.0, 1.0), v_guess=[1.0, 2.0])


def test_reduced_hessian_on_trim_manifold():
    system = builtin_system("double_integrator")
    eigs = reduced_hessian_eigenvalues(system, quadratic_cost(2.0, 1.0), [0.0], [0.0], [0.0])
    # null space of [0 1] is the velocity direction
    np.testing.assert_allclose(eigs, [2.0], atol=1e-12)


# ---------------------------------------------------------------------------
# Multi-start
# ---------------------------------------------------------------------------

@pytest.fixture
def double_well():
    return SteadyStateProblem(
        builtin_system("double_integrator"),
        expr_cost("(v[0]^2 - 1)^2 + u[0]^2", n_q=1, m=1),
    )


def test_multi_start_finds_both_wells(double_well):
    trims = multi_start(double_well, default_guesses(double_well), workers=2)
    best = sorted(float(tr.v_bar[0]) for tr in trims[:2])
    np.testing.assert_allclose(best, [-1.0, 1.0], atol=1e-8)
    assert all(tr.cost_value == pytest.approx(0.0, abs=1e-12) for tr in trims[:2])
    assert all(tr.is_minimizer for tr in trims[:2])


def test_multi_start_flags_maximum(double_well):
    trims = multi_start(double_well, [([0.0], [0.0], [0.0])])
    assert len(trims) == 1
    assert trims[0].v_bar[0] == 0.0
    assert not trims[0].is_minimizer


def test_multi_start_merges_duplicates(damped_problem):
    trims = multi_start(damped_problem, [([1.0], [0.0], [0.0]), ([3.0], [0.0], [0.0]), ([-4.0], [0.0], [0.0])])
    assert len(trims) == 1
    assert trims[0].v_bar[0] == pytest.approx(1.6)


def test_multi_start_needs_guesses(damped_problem):
    with pytest.raises(ModelValidationError):
        multi_start(damped_problem, [])


def test_default_guesses_span():
    p = SteadyStateProblem(builtin_system("double_integrator", n=2), quadratic_cost(np.eye(2), np.eye(2)))
    guesses = default_guesses(p, spread=4.0, count=5)
    assert len(guesses) == 5
    np.testing.assert_allclose(guesses[0][0], [-4.0, -4.0])
    np.testing.assert_allclose(guesses[-1][0], [4.0, 4.0])


# ---------------------------------------------------------------------------
# Trim trajectory
# ---------------------------------------------------------------------------

def test_trim_trajectory(damped_problem):
    trim = solve_velocity_steady_state(damped_problem)
    t = np.linspace(1.0, 6.0, 11)
    traj = trim_trajectory(trim, t, q0=[2.0])
    np.testing.assert_allclose(traj.q[:, 0], 2.0 + 1.6 * (t - 1.0), atol=1e-10)
    np.testing.assert_allclose(traj.v[:, 0], 1.6, atol=1e-10)
    np.testing.assert_allclose(traj.lambda_v[:, 0], -0.8, atol=1e-10)
    assert np.all(traj.lambda_q == 0.0)
    assert traj.objective == pytest.approx(0.4 * 5.0)


def test_reduced_hessian_accepts_plain_sequences(damped_problem):
    trim = solve_velocity_steady_state(damped_problem)
    from_lists = reduced_hessian_eigenvalues(
        damped_problem.system, damped_problem.cost, [1.6], [0.8], [-0.8],
    )
    np.testing.assert_allclose(from_lists, trim.reduced_hessian_eigenvalues, atol=1e-8)
    np.testing.assert_allclose(damped_problem.cost.hessian([1.6], [0.8]), np.eye(2))
