"""
Tests for turnpike measures, dissipativity checks and adjoint-interval detection.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from velocity_turnpike.analytic import AnalyticScenario, analytic_trajectory
from velocity_turnpike.errors import InvalidStorageError, ModelValidationError, UnavailableBoundError
from velocity_turnpike.model import Trajectory, Trim, builtin_system, quadratic_cost
from velocity_turnpike.steady import SteadyStateProblem, solve_velocity_steady_state, trim_trajectory
from velocity_turnpike.turnpike import (
    Storage,
    StorageKind,
    adjoint_intervals,
    check_dissipativity,
    deviation,
    interior_max,
    measure_above,
    prop1_bound,
    theta_measure,
    turnpike_report,
)

ORIGIN = Trim(v_bar=[0.0], u_bar=[0.0], cost_value=0.0, lambda_bar=[0.0])
REFERENCE_COST = quadratic_cost(1.0, 1.0)


def reference(T, points_per_unit=100, **overrides):
    data = dict(q0=0.0, v0=3.0, qT=5.0, vT=6.0, T=T)
    data.update(overrides)
    grid = np.linspace(0.0, T, int(points_per_unit * T) + 1)
    return analytic_trajectory(AnalyticScenario(**data), grid)


def profile(t, v, u=None):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    u = np.zeros_like(v) if u is None else np.asarray(u, dtype=float)
    return Trajectory(t=t, q=np.zeros_like(t), v=v, u=u)


@pytest.fixture(scope="module")
def sweep():
    return [reference(T) for T in (10.0, 15.0, 20.0, 25.0, 30.0, 35.0)]


@pytest.fixture(scope="module")
def damped_trim():
    p = SteadyStateProblem(builtin_system("damped_integrator", c=0.5), quadratic_cost(1.0, 1.0, v_ref=2.0))
    return solve_velocity_steady_state(p)


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------

def test_measure_on_trim_is_zero():
    traj = profile(np.linspace(0.0, 4.0, 9), np.zeros(9))
    for eps in (0.0, 0.1, 5.0):
        assert theta_measure(traj, ORIGIN, eps) == 0.0


def test_measure_of_constant_deviation():
    traj = profile([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    assert theta_measure(traj, ORIGIN, 0.5) == 2.0
    # the set is {d > eps}, strict
    assert theta_measure(traj, ORIGIN, 1.0) == 0.0


def test_measure_interpolates_crossings():
    assert measure_above(np.array([0.0, 1.0]), np.array([0.0, 2.0]), 0.5) == pytest.approx(0.75)
    assert measure_above(np.array([0.0, 1.0, 3.0]), np.array([2.0, 0.0, 2.0]), 1.0) == pytest.approx(1.5)


def test_deviation_uses_velocity_and_input():
    traj = profile([0.0, 1.0], [3.0, 0.0], [4.0, 0.0])
    np.testing.assert_allclose(deviation(traj, ORIGIN), [5.0, 0.0])


def test_measure_input_validation():
    traj = profile([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ModelValidationError):
        theta_measure(traj, ORIGIN, -0.1)
    with pytest.raises(ModelValidationError):
        theta_measure(traj, Trim(v_bar=[0.0, 0.0], u_bar=[0.0], cost_value=0.0), 0.1)


@settings(max_examples=100, deadline=None)
@given(
    values=st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=2, max_size=40),
    eps=st.lists(st.floats(min_value=0, max_value=6, allow_nan=False), min_size=2, max_size=6),
)
def test_measure_non_increasing_and_bounded(values, eps):
    t = np.linspace(0.0, 7.0, len(values))
    traj = profile(t, values)
    measures = [theta_measure(traj, ORIGIN, e) for e in sorted(eps)]
    assert all(0.0 <= m <= 7.0 + 1e-12 for m in measures)
    assert all(a >= b - 1e-12 for a, b in zip(measures, measures[1:]))


def test_interior_max():
    t = np.linspace(0.0, 10.0, 11)
    values = np.arange(11.0)
    assert interior_max(t, values, 2.0) == 8.0
    assert math.isnan(interior_max(t, values, 5.0))


# ---------------------------------------------------------------------------
# Turnpike report
# ---------------------------------------------------------------------------

def test_report_on_closed_form_sweep(sweep):
    report = turnpike_report(sweep, ORIGIN, nu_bar=6.0, eps_grid=[2.0, 1.0])
    np.testing.assert_array_equal(report.epsilons, [1.0, 2.0])
    np.testing.assert_array_equal(report.horizons, [10.0, 15.0, 20.0, 25.0, 30.0, 35.0])
    assert report.verdict
    # the time spent away settles once the boundary layers are resolved
    assert abs(report.theta_measures[-1, 0] - report.theta_measures[-2, 0]) < 0.05
    assert np.all(report.exact_measures <= report.horizons + 1e-12)


def test_hyperbolic_interior_bound(sweep):
    report = turnpike_report(sweep, ORIGIN, nu_bar=6.0, eps_grid=[1.0])
    rows = {row.T: row for row in report.hyperbolic}
    # nu_bar = 6 leaves no interior at T = 10
    assert math.isnan(rows[10.0].T_times_max_deviation)
    assert any("undefined" in note for note in report.notes)
    assert report.hyperbolic_ratio <= 2.0
    scaled = [rows[T].T_times_max_deviation for T in (15.0, 20.0, 25.0, 30.0, 35.0)]
    assert report.C_estimate == pytest.approx(max(scaled))
    assert all(np.isfinite(rows[T].T_times_max_adjoint) for T in (15.0, 35.0))
    np.testing.assert_allclose(report.nu_bound, max(12.0, report.C_estimate / 1.0))


def test_report_serializes(sweep):
    payload = turnpike_report(sweep[:2], ORIGIN, nu_bar=3.0, eps_grid=[0.0, 1.0]).as_dict()
    assert payload["nu_bound"][0] is None
    assert len(payload["hyperbolic"]) == 2


def test_report_input_validation(sweep):
    with pytest.raises(ModelValidationError):
        turnpike_report([], ORIGIN, 3.0, [1.0])
    with pytest.raises(ModelValidationError):
        turnpike_report(sweep[:1], ORIGIN, 3.0, [-1.0])
    with pytest.raises(ModelValidationError):
        turnpike_report(sweep[:1], ORIGIN, -1.0, [1.0])
    other = Trim(v_bar=[1.0], u_bar=[0.0], cost_value=0.5)
    with pytest.raises(ModelValidationError):
        turnpike_report(sweep[:1], [ORIGIN, other], 3.0, [1.0])


# ---------------------------------------------------------------------------
# Dissipativity
# ---------------------------------------------------------------------------

def test_quadratic_lq_fits_half(sweep):
    # w = l and |(v, u)|^2 = 2 l, so a = 1/2 is the largest admissible coefficient
    report = check_dissipativity(sweep, ORIGIN, cost=REFERENCE_COST)
    assert 0.49 <= report.alpha_a <= 0.51
    assert report.alpha_fitted and report.strict
    assert not report.violations
    assert report.S_hat == 0.0
    assert report.C_cost == pytest.approx(max(s[-1] for s in report.cumulative_supply))


def test_given_alpha_above_half_violates(sweep):
    report = check_dissipativity(sweep[:1], ORIGIN, alpha_a=0.6, cost=REFERENCE_COST)
    assert not report.strict
    assert report.max_violation_plain[0] <= 1e-9
    assert report.max_violation_strict[0] > 1e-9
    assert all(v.inequality == "strict" for v in report.violations)
    with pytest.raises(UnavailableBoundError):
        prop1_bound(report, [1.0])


def test_supply_below_trim_cost_violates_plain_inequality(damped_trim):
    # (v, u) = (2, 0) costs less than the optimal trim
    t = np.linspace(0.0, 2.0, 21)
    traj = profile(t, np.full(21, 2.0))
    cost = quadratic_cost(1.0, 1.0, v_ref=2.0)
    report = check_dissipativity([traj], damped_trim, alpha_a=0.1, cost=cost)
    plain = [v for v in report.violations if v.inequality == "plain"]
    assert plain
    worst = max(plain, key=lambda v: v.margin)
    assert worst.t_start == 0.0 and worst.t_end == 2.0
    assert worst.margin == pytest.approx(0.4 * 2.0)
    assert report.as_dict()["violation_count"] == len(report.violations)


def test_trim_trajectory_is_dissipative(damped_trim):
    traj = trim_trajectory(damped_trim, np.linspace(0.0, 5.0, 51))
    report = check_dissipativity([traj], damped_trim, cost=quadratic_cost(1.0, 1.0, v_ref=2.0))
    assert report.strict
    assert report.alpha_a == 10.0
    assert report.max_violation_plain[0] <= 1e-9


def test_quadratic_storage_values(damped_trim):
    traj = trim_trajectory(damped_trim, np.linspace(0.0, 1.0, 3))
    storage = Storage(StorageKind.QUADRATIC, P=np.diag([0.0, 2.0]))
    np.testing.assert_allclose(storage.evaluate(traj, damped_trim), 0.0)
    shifted = Storage(StorageKind.QUADRATIC, P=np.diag([0.0, 2.0]), v_ref=[0.6])
    np.testing.assert_allclose(shifted.evaluate(traj, damped_trim), 1.0)


def test_negative_storage_rejected(sweep):
    storage = Storage(StorageKind.QUADRATIC, P=np.diag([-1.0, 0.0]))
    with pytest.raises(InvalidStorageError):
        check_dissipativity(sweep[:1], ORIGIN, storage=storage, cost=REFERENCE_COST)


@pytest.mark.parametrize("P", [None, [[1.0, 2.0], [0.0, 1.0]], np.eye(3)])
def test_storage_matrix_validation(P):
    with pytest.raises(ModelValidationError):
        Storage(StorageKind.QUADRATIC, P=P)


def test_dissipativity_input_validation(sweep):
    with pytest.raises(ModelValidationError):
        check_dissipativity(sweep[:1], ORIGIN)
    with pytest.raises(ModelValidationError):
        check_dissipativity([], ORIGIN, cost=REFERENCE_COST)
    with pytest.raises(ModelValidationError):
        check_dissipativity(sweep[:1], ORIGIN, alpha_a="guess", cost=REFERENCE_COST)


def test_time_away_bound_holds_on_sweep(sweep):
    report = check_dissipativity(sweep, ORIGIN, cost=REFERENCE_COST)
    table = prop1_bound(report, [0.0, 0.5, 1.0, 2.0], sweep)
    assert math.isinf(table.bounds[0])
    assert table.bounds[1] == pytest.approx(report.C_cost / (report.alpha_a * 0.25))
    assert len(table.checks) == 4 * len(sweep)
    assert table.all_ok


# ---------------------------------------------------------------------------
# Adjoint intervals
# ---------------------------------------------------------------------------

def test_trim_trajectory_is_one_interval(damped_trim):
    system = builtin_system("damped_integrator", c=0.5)
    traj = trim_trajectory(damped_trim, np.linspace(0.0, 4.0, 41))
    report = adjoint_intervals(traj, 1e-6, 1e-8, system, quadratic_cost(1.0, 1.0, v_ref=2.0))
    assert report.intervals == [(0.0, 4.0)]
    assert report.kkt_ok
    assert report.kkt_residuals[0] <= 1e-10


def test_position_adjoint_blocks_intervals():
    traj = reference(20.0)
    report = adjoint_intervals(traj, 1e-6, 1e-8)
    assert report.intervals == []
    assert report.lambda_q_max == pytest.approx(2.0 / 9.0, rel=1e-6)
    assert report.kkt_residuals == []


def test_interval_in_the_middle_of_a_long_horizon():
    # chosen so that lambda_q vanishes
    T = 60.0
    traj = reference(T, points_per_unit=20, qT=math.tanh(0.5 * T) * 9.0)
    report = adjoint_intervals(traj, 1e-6, 1e-8)
    assert report.lambda_q_max <= 1e-12
    middle = [iv for iv in report.intervals if iv[0] <= 30.0 <= iv[1]]
    assert len(middle) == 1
    assert middle[0][1] - middle[0][0] >= 10.0
    assert all(5.0 <= a and b <= T - 5.0 for a, b in report.intervals)


def test_adjoint_interval_validation(damped_trim):
    traj = trim_trajectory(damped_trim, np.linspace(0.0, 1.0, 5))
    with pytest.raises(ModelValidationError):
        adjoint_intervals(traj, -1.0, 1e-8)
    with pytest.raises(ModelValidationError):
        adjoint_intervals(traj, 1e-6, 1e-8, system=builtin_system("damped_integrator"))
    with pytest.raises(ModelValidationError):
        adjoint_intervals(profile([0.0, 1.0], [0.0, 0.0]), 1e-6, 1e-8)
