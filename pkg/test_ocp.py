"""
Tests for the direct and indirect OCP solvers, checked against the closed form.
"""

import numpy as np
import pytest

from velocity_turnpike.analytic import AnalyticScenario, adjoint_initial_values, analytic_trajectory
from velocity_turnpike.errors import ConvergenceError, ModelValidationError
from velocity_turnpike.model import OcpSpec, SolveMethod, builtin_system, expr_system, quadratic_cost
from velocity_turnpike.numerics import NewtonConfig
from velocity_turnpike.ocp import (
    CollocationLayout,
    default_method,
    pmp_residuals,
    solve,
    solve_direct,
    solve_indirect,
    time_derivative,
)
from velocity_turnpike.ocp.shooting import MAX_SEGMENT_GROWTH, choose_segments

REFINEMENT = (250, 500, 1000, 2000)


def reference_spec(T=20.0, N=2000, **overrides):
    data = dict(
        system=builtin_system("double_integrator"), cost=quadratic_cost(1.0, 1.0),
        T=T, q0=0.0, v0=3.0, qT=5.0, vT=6.0, N=N,
    )
    data.update(overrides)
    return OcpSpec(**data)


def exact(spec):
    s = AnalyticScenario.from_spec(spec)
    return analytic_trajectory(s, spec.grid)


def damped_spec(T=10.0, N=1000):
    return OcpSpec(
        system=builtin_system("damped_integrator", c=0.5), cost=quadratic_cost(1.0, 1.0, v_ref=2.0),
        T=T, q0=0.0, v0=0.0, qT=16.0, vT=1.6, N=N,
    )


def max_error(traj, ref, field):
    return float(np.max(np.abs(getattr(traj, field) - getattr(ref, field))))


def observed_orders(errors):
    errors = np.asarray(errors, dtype=float)
    return np.log2(errors[:-1] / errors[1:])


@pytest.fixture(scope="module")
def direct_reference():
    spec = reference_spec()
    return spec, solve_direct(spec)


@pytest.fixture(scope="module")
def indirect_reference():
    spec = reference_spec()
    return spec, solve_indirect(spec)


# ---------------------------------------------------------------------------
# Direct collocation
# ---------------------------------------------------------------------------

def test_layout_bandwidth():
    L = CollocationLayout(n=1, m=1, N=10)
    assert L.block == 5 and L.bandwidth == 4
    assert L.size == 2 + 10 * 5 + 3 + 2
    assert L.betaT.stop == L.size


def test_direct_matches_closed_form(direct_reference):
    spec, traj = direct_reference
    ref = exact(spec)
    assert traj.diagnostics["converged"]
    assert traj.diagnostics["extrapolated"] and traj.diagnostics["fine_N"] == 2 * spec.N
    np.testing.assert_allclose(traj.v, ref.v, rtol=0, atol=1e-5)
    np.testing.assert_allclose(traj.u, ref.u, rtol=0, atol=1e-5)
    np.testing.assert_allclose(traj.q, ref.q, rtol=0, atol=1e-5)


def test_direct_end_controls_follow_stationarity(direct_reference):
    spec, traj = direct_reference
    ref = exact(spec)
    for k in (0, -1):
        assert traj.u[k, 0] == pytest.approx(-traj.lambda_v[k, 0], abs=1e-9)
        assert traj.u[k, 0] == pytest.approx(ref.u[k, 0], abs=1e-5)


def test_direct_boundary_conditions(direct_reference):
    spec, traj = direct_reference
    assert max(traj.diagnostics["boundary_errors"].values()) <= 1e-9
    assert traj.diagnostics["max_defect"] <= 1e-10


def test_direct_adjoint_estimates(direct_reference):
    spec, traj = direct_reference
    lq0, lv0 = adjoint_initial_values(AnalyticScenario.from_spec(spec))
    assert float(np.max(np.abs(traj.lambda_q - traj.lambda_q[0]))) <= 1e-8
    assert traj.lambda_q[0, 0] == pytest.approx(lq0, abs=1e-5)
    assert traj.lambda_v[0, 0] == pytest.approx(lv0, abs=1e-5)


def test_direct_objective_gap(direct_reference):
    spec, traj = direct_reference
    h = spec.T / spec.N
    assert abs(traj.objective - exact(spec).objective) <= 50 * h * h


def test_direct_raw_collocation_is_second_order():
    v_errors, u_errors = [], []
    for N in REFINEMENT:
        spec = reference_spec(N=N)
        traj = solve_direct(spec, extrapolate=False)
        assert traj.diagnostics["extrapolated"] is False
        ref = exact(spec)
        v_errors.append(max_error(traj, ref, "v"))
        u_errors.append(max_error(traj, ref, "u"))
    for orders in (observed_orders(v_errors), observed_orders(u_errors)):
        assert np.all((orders > 1.7) & (orders < 2.3)), orders


def test_pmp_residuals_of_collocation_shrink_second_order():
    residuals = []
    for N in REFINEMENT:
        spec = reference_spec(N=N)
        report = pmp_residuals(solve_direct(spec, extrapolate=False), spec)
        assert report.max_norms["stationarity"] <= 1e-7
        residuals.append(report.max_norms["adjoint_v"])
    orders = observed_orders(residuals)
    assert np.all(orders > 1.7), orders


def test_direct_dense_and_banded_agree():
    spec = reference_spec(T=5.0, N=50)
    banded = solve_direct(spec, kkt_solver="banded")
    dense = solve_direct(spec, kkt_solver="dense")
    np.testing.assert_allclose(banded.v, dense.v, rtol=0, atol=1e-10)
    np.testing.assert_allclose(banded.lambda_v, dense.lambda_v, rtol=0, atol=1e-10)


def test_direct_translation_invariance():
    base = solve_direct(reference_spec(T=8.0, N=200))
    moved = solve_direct(reference_spec(T=8.0, N=200, q0=100.0, qT=105.0))
    np.testing.assert_allclose(moved.v, base.v, rtol=0, atol=1e-8)
    np.testing.assert_allclose(moved.q - base.q, 100.0, rtol=0, atol=1e-8)


def test_direct_rejects_unknown_kkt_solver():
    with pytest.raises(ModelValidationError):
        solve_direct(reference_spec(N=10), kkt_solver="sparse")


def test_direct_rejects_warm_start_on_other_grid():
    warm = exact(reference_spec(N=20))
    with pytest.raises(ModelValidationError):
        solve_direct(reference_spec(N=10), initial=warm)


def test_direct_warm_start_from_solution():
    spec = reference_spec(T=5.0, N=100)
    cold = solve_direct(spec)
    warm = solve_direct(spec, initial=cold)
    np.testing.assert_allclose(warm.v, cold.v, atol=1e-10)


def test_direct_failure_carries_last_iterate():
    spec = OcpSpec(
        system=expr_system(["u[0] - 0.2*v[0]^3"], m=1), cost=quadratic_cost(1.0, 1.0),
        T=5.0, q0=0.0, v0=2.0, qT=4.0, vT=-1.0, N=50,
    )
    with pytest.raises(ConvergenceError) as excinfo:
        solve_direct(spec, NewtonConfig(max_iter=1))
    err = excinfo.value
    assert err.result is not None
    assert err.result.t.size == 51
    assert err.result.diagnostics["converged"] is False




# ---------------------------------------------------------------------------
# Indirect shooting
# ---------------------------------------------------------------------------

def test_indirect_single_shooting_matches_closed_form():
    spec = reference_spec(T=4.0, N=400)
    traj = solve_indirect(spec)
    lq0, lv0 = adjoint_initial_values(AnalyticScenario.from_spec(spec))
    assert traj.diagnostics["segments"] == 1
    assert traj.diagnostics["lambda_q0"][0] == pytest.approx(lq0, abs=1e-8)
    assert traj.diagnostics["lambda_v0"][0] == pytest.approx(lv0, abs=1e-8)
    np.testing.assert_allclose(traj.v, exact(spec).v, rtol=0, atol=5e-8)


def test_indirect_reference_adjoints(indirect_reference):
    spec, traj = indirect_reference
    lq0, lv0 = adjoint_initial_values(AnalyticScenario.from_spec(spec))
    assert traj.diagnostics["converged"]
    assert traj.diagnostics["lambda_q0"][0] == pytest.approx(lq0, abs=1e-8)
    assert traj.diagnostics["lambda_v0"][0] == pytest.approx(lv0, abs=1e-8)


def test_indirect_terminal_residual_is_raw(indirect_reference):
    _, traj = indirect_reference
    assert traj.diagnostics["terminal_residual"] <= NewtonConfig().tol_residual
    assert traj.diagnostics["residual_scale"] >= 1.0


def test_indirect_picks_segments_for_long_horizon(indirect_reference):
    spec, traj = indirect_reference
    segments = traj.diagnostics["segments"]
    assert 1 < segments < spec.N
    # e^T growth split so no segment amplifies much beyond the target
    assert np.exp(spec.T / segments) <= 10 * MAX_SEGMENT_GROWTH


def test_choose_segments_keeps_short_horizons_single():
    spec = reference_spec(T=2.0, N=200)
    assert choose_segments(spec, NewtonConfig(), np.zeros(2)) == 1


def test_indirect_single_shooting_cannot_meet_tolerance_on_long_horizon():
    with pytest.raises(ConvergenceError):
        solve_indirect(reference_spec(), segments=1, warm_start=False)


def test_indirect_explicit_segments_are_used():
    spec = reference_spec(N=1000)
    traj = solve_indirect(spec, segments=8)
    assert traj.diagnostics["segments"] == 8
    assert traj.diagnostics["terminal_residual"] <= NewtonConfig().tol_residual
    np.testing.assert_allclose(traj.v, exact(spec).v, rtol=0, atol=1e-7)


def test_indirect_lambda_q_is_constant(indirect_reference):
    _, traj = indirect_reference
    assert traj.diagnostics["lambda_q_drift"] <= 1e-8


def test_indirect_fourth_order():
    errors = []
    for N in REFINEMENT:
        spec = reference_spec(N=N)
        errors.append(max_error(solve_indirect(spec), exact(spec), "v"))
    orders = observed_orders(errors)
    assert np.all((orders > 3.7) & (orders < 4.3)), orders


@pytest.mark.parametrize("segments", [0, 2.5, 10_000])
def test_indirect_rejects_bad_segments(segments):
    with pytest.raises(ModelValidationError):
        solve_indirect(reference_spec(N=100), segments=segments)


# ---------------------------------------------------------------------------
# Cross-checks between solvers
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("field", ["v", "u"])
def test_solvers_agree_pairwise(direct_reference, indirect_reference, field):
    spec, direct = direct_reference
    _, indirect = indirect_reference
    analytic = exact(spec)
    pairs = [(analytic, direct), (analytic, indirect), (direct, indirect)]
    for a, b in pairs:
        assert max_error(a, b, field) <= 1e-5


def test_direct_and_indirect_objectives_agree(direct_reference, indirect_reference):
    _, direct = direct_reference
    _, indirect = indirect_reference
    assert direct.objective == pytest.approx(indirect.objective, abs=1e-6)


def test_direct_and_indirect_agree_on_damped_problem():
    spec = damped_spec()
    direct = solve_direct(spec)
    indirect = solve_indirect(spec)
    np.testing.assert_allclose(direct.v, indirect.v, rtol=0, atol=2e-4)
    np.testing.assert_allclose(direct.lambda_q, indirect.lambda_q, rtol=0, atol=2e-4)


# ---------------------------------------------------------------------------
# Residuals and dispatch
# ---------------------------------------------------------------------------

def test_time_derivative_fourth_order_on_uniform_grid():
    t = np.linspace(0.0, 2.0, 201)
    D = time_derivative(t, np.sin(t)[:, None])
    np.testing.assert_allclose(D[:, 0], np.cos(t), atol=1e-8)


def test_time_derivative_non_uniform_grid():
    t = np.array([0.0, 0.1, 0.3, 0.6, 1.0, 1.5])
    D = time_derivative(t, (t ** 2)[:, None])
    np.testing.assert_allclose(D[:, 0], 2 * t, atol=1e-12)


def test_pmp_residuals_of_closed_form():
    spec = reference_spec(N=2000)
    report = pmp_residuals(exact(spec), spec)
    assert report.max_norms["lambda_q_rate"] <= 1e-10
    assert report.max_norms["stationarity"] <= 1e-12
    assert report.max_norms["adjoint_v"] <= 1e-6


def test_pmp_residuals_of_direct_solution(direct_reference):
    spec, traj = direct_reference
    report = pmp_residuals(traj, spec)
    assert report.max_norms["lambda_q_rate"] <= 1e-6
    assert report.l2_norms["adjoint_v"] <= 1e-2
    assert report.l2_norms["stationarity"] <= 1e-2


def test_pmp_residuals_need_adjoints():
    spec = reference_spec(N=10)
    traj = exact(spec)
    bare = type(traj)(t=traj.t, q=traj.q, v=traj.v, u=traj.u)
    with pytest.raises(ModelValidationError):
        pmp_residuals(bare, spec)


def test_default_method():
    assert default_method(reference_spec(N=10)) == SolveMethod.ANALYTIC
    assert default_method(damped_spec(N=10)) == SolveMethod.DIRECT


def test_dispatch_routes_methods():
    spec = reference_spec(T=5.0, N=100)
    assert solve(spec).method == "analytic"
    assert solve(spec, "direct", kkt_solver="dense").method == "direct"
    assert solve(spec, SolveMethod.INDIRECT, segments=2).method == "indirect"
