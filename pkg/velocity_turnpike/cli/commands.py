"""
Subcommand implementations: solve, sweep, steady, turnpike.

Commands raise the package's exceptions; main.py maps them to exit codes.
Payloads (CSV, reports) go to files or the given stream, logs to stderr.
"""

import json
import logging
import math
import sys
import concurrent.futures
from pathlib import Path
from typing import Callable, Dict, List, Optional, TextIO, Tuple, Union

import numpy as np

from ..config import get_settings
from ..errors import ConvergenceError, ScenarioError, SingularMatrixError, UnavailableBoundError
from ..model import SolveMethod, Trajectory, Trim
from ..ocp import default_method, solve
from ..steady import default_guesses, multi_start, solve_velocity_steady_state
from ..turnpike import (
    adjoint_intervals,
    check_dissipativity,
    deviation,
    interior_max,
    prop1_bound,
    turnpike_report,
)
from .csv_io import write_table, write_trajectory_csv
from .scenario import Scenario

logger = logging.getLogger(__name__)

DEFAULT_NU_BAR = 3.0

SUMMARY_COLUMNS = ("T", "objective", "max_interior_deviation", "T_times_max_deviation", "lambda_q0", "lambda_v0")


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def resolve_method(scenario: Scenario, method: Optional[Union[str, SolveMethod]] = None) -> SolveMethod:
    """Command line beats the scenario's solver.method, which beats the default."""
    if method is not None:
        return SolveMethod(method)
    if scenario.raw.solver.method is not None:
        return scenario.raw.solver.method
    return default_method(scenario.ocp_spec(scenario.horizons[0]))


def _solve_one(scenario: Scenario, T: float, method: SolveMethod) -> Trajectory:
    return solve(
        scenario.ocp_spec(T),
        method,
        cfg=scenario.newton_config(),
        segments=scenario.raw.solver.segments,
        kkt_solver=scenario.raw.solver.kkt_solver,
    )


def solve_horizons(
    scenario: Scenario,
    method: SolveMethod,
    on_result: Optional[Callable[[float, Trajectory], None]] = None,
    workers: Optional[int] = None,
) -> List[Trajectory]:
    """Solve every horizon concurrently; results sorted by T.

    on_result runs in the calling thread as each solve finishes. The first
    failure cancels pending solves and propagates.
    """
    horizons = scenario.horizons
    # build the models once before fanning out
    _ = (scenario.system, scenario.cost)
    workers = workers or get_settings().sweep_workers
    results: Dict[float, Trajectory] = {}
    executor = concurrent.futures.ThreadPoolExecutor(max_workers=workers)
    try:
        futures = {executor.submit(_solve_one, scenario, T, method): T for T in horizons}
        for future in concurrent.futures.as_completed(futures):
            T = futures[future]
            try:
                traj = future.result()
            except Exception as e:
                logger.error(f"Solve for T={T:g} failed: {e}")
                raise
            results[T] = traj
            if on_result is not None:
                on_result(T, traj)
    finally:
        executor.shutdown(wait=True, cancel_futures=True)
    return [results[T] for T in sorted(results)]


def steady_trim(scenario: Scenario) -> Tuple[Trim, str]:
    """Newton from the scenario guess; multi-start when that fails."""
    problem = scenario.steady_problem()
    cfg = scenario.newton_config()
    try:
        return solve_velocity_steady_state(problem, cfg), "newton"
    except (ConvergenceError, SingularMatrixError) as e:
        logger.warning(f"Steady-state Newton from the scenario guess failed ({e}); trying multi-start")
    s = scenario.raw.steady
    guesses = [(problem.v_guess, problem.u_guess, problem.lambda_guess)] + default_guesses(problem, s.spread, s.starts)
    trims = multi_start(problem, guesses, cfg)
    return trims[0], f"multi-start ({len(trims)} distinct steady states from {len(guesses)} guesses)"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n")
    logger.info(f"Wrote {path}")


def _fmt_vec(x: np.ndarray) -> str:
    return "[" + ", ".join(f"{xi:.12g}" for xi in np.atleast_1d(x)) + "]"


def _column_names(name: str, size: int) -> List[str]:
    return [name] if size == 1 else [f"{name}_{i}" for i in range(size)]


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(scenario: Scenario, method: Optional[str] = None, out: Optional[Path] = None) -> Trajectory:
    """Solve the single-horizon problem and write its trajectory CSV (stdout without --out)."""
    if scenario.raw.ocp.T is None:
        raise ScenarioError("ocp.T", "solve needs a single horizon T")
    resolved = resolve_method(scenario, method)
    traj = _solve_one(scenario, scenario.raw.ocp.T, resolved)
    if out is None:
        write_trajectory_csv(traj, sys.stdout)
    else:
        write_trajectory_csv(traj, out)
    logger.info(f"solve ({resolved.value}): objective={traj.objective:.12g}")
    return traj


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def summary_row(traj: Trajectory, trim: Trim, nu_bar: float) -> List[float]:
    d = deviation(traj, trim)
    max_dev = interior_max(traj.t, d, nu_bar)
    n = traj.q.shape[1]
    lam_q0 = traj.lambda_q[0] if traj.has_adjoints else np.full(n, np.nan)
    lam_v0 = traj.lambda_v[0] if traj.has_adjoints else np.full(n, np.nan)
    return [traj.T, traj.objective, max_dev, traj.T * max_dev, *lam_q0, *lam_v0]


def summary_columns(n_q: int) -> List[str]:
    return list(SUMMARY_COLUMNS[:4]) + _column_names("lambda_q0", n_q) + _column_names("lambda_v0", n_q)


def cmd_sweep(scenario: Scenario, out_dir: Path, method: Optional[str] = None) -> List[Trajectory]:
    """One trajectory CSV per horizon plus summary.csv.

    On failure the trajectories already written stay on disk and the summary
    holds the completed rows.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = resolve_method(scenario, method)
    trim, _ = steady_trim(scenario)
    nu_bar = scenario.raw.turnpike.nu_bar if scenario.raw.turnpike else DEFAULT_NU_BAR
    n = scenario.system.n_q
    rows: Dict[float, List[float]] = {}

    def record(T: float, traj: Trajectory) -> None:
        write_trajectory_csv(traj, out_dir / f"trajectory_T{T:g}.csv")
        rows[T] = summary_row(traj, trim, nu_bar)

    try:
        trajs = solve_horizons(scenario, resolved, on_result=record)
    finally:
        if rows:
            write_table(out_dir / "summary.csv", summary_columns(n), np.array([rows[T] for T in sorted(rows)]))
    logger.info(f"sweep ({resolved.value}) over {len(trajs)} horizons written to {out_dir}")
    return trajs


# ---------------------------------------------------------------------------
# steady
# ---------------------------------------------------------------------------

def cmd_steady(scenario: Scenario, stream: Optional[TextIO] = None) -> Trim:
    """Print the optimal velocity steady state with its KKT diagnostics."""
    stream = stream or sys.stdout
    trim, path = steady_trim(scenario)
    eigs = trim.reduced_hessian_eigenvalues
    verdict = "minimizer (reduced Hessian PSD)" if trim.is_minimizer else "not a minimizer (reduced Hessian indefinite)"
    lines = [
        f"steady state of '{scenario.raw.name}' ({scenario.system.name})",
        f"  v_bar        = {_fmt_vec(trim.v_bar)}",
        f"  u_bar        = {_fmt_vec(trim.u_bar)}",
        f"  lambda_bar   = {_fmt_vec(trim.lambda_bar)}",
        f"  cost         = {trim.cost_value:.12g}",
        f"  KKT residual = {trim.kkt_residual:.3e}",
        f"  reduced Hessian eigenvalues = {_fmt_vec(eigs) if eigs is not None and eigs.size else '[]'}: {verdict}",
        f"  path         = {path}",
    ]
    for violation in trim.bound_violations:
        lines.append(f"  bound violation: {violation}")
    stream.write("\n".join(lines) + "\n")
    return trim


# ---------------------------------------------------------------------------
# turnpike
# ---------------------------------------------------------------------------

def _theta_table(report) -> Tuple[List[str], np.ndarray]:
    columns = ["eps"] + [f"T_{T:g}" for T in report.horizons]
    return columns, np.column_stack([report.epsilons, report.theta_measures.T])


def _hyperbolic_table(report) -> Tuple[List[str], np.ndarray]:
    columns = ["T", "max_interior_deviation", "T_times_max_deviation", "max_interior_adjoint", "T_times_max_adjoint"]
    rows = [[r.T, r.max_interior_deviation, r.T_times_max_deviation, r.max_interior_adjoint, r.T_times_max_adjoint]
            for r in report.hyperbolic]
    return columns, np.array(rows)


def cmd_turnpike(
    scenario: Scenario,
    out_dir: Path,
    method: Optional[str] = None,
    stream: Optional[TextIO] = None,
) -> dict:
    """Turnpike tables, dissipativity summary and bound table for the horizon sweep.

    Writes theta.csv, hyperbolic.csv, dissipativity.csv, bound.csv and
    report.json into out_dir and prints a one-line verdict.
    """
    tp = scenario.raw.turnpike
    if tp is None:
        raise ScenarioError("turnpike", "section required for the turnpike command")
    stream = stream or sys.stdout
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = resolve_method(scenario, method)
    trim, trim_path = steady_trim(scenario)
    trajs = solve_horizons(scenario, resolved)

    report = turnpike_report(trajs, trim, tp.nu_bar, tp.eps_grid, delta_exact=tp.delta_exact)
    write_table(out_dir / "theta.csv", *_theta_table(report))
    write_table(out_dir / "hyperbolic.csv", *_hyperbolic_table(report))
    payload: dict = {
        "scenario": scenario.raw.name,
        "method": resolved.value,
        "steady_state_path": trim_path,
        "turnpike": report.as_dict(),
    }

    adjoint = [
        adjoint_intervals(tr, tp.adjoint_tol_const, tp.adjoint_tol_zero, scenario.system, scenario.cost).as_dict()
        for tr in trajs if tr.has_adjoints
    ]
    payload["adjoint_intervals"] = adjoint

    diss_text = "dissipativity skipped (no dissipativity section)"
    bound_text = ""
    sec = scenario.raw.dissipativity
    if sec is None:
        stream.write("notice: scenario has no dissipativity section; dissipativity checks skipped\n")
    else:
        diss = check_dissipativity(trajs, trim, scenario.storage(), sec.alpha_a, scenario.cost)
        write_table(
            out_dir / "dissipativity.csv",
            ["T", "supply_integral", "max_violation_plain", "max_violation_strict"],
            np.column_stack([diss.horizons, diss.supply_integrals, diss.max_violation_plain,
                             diss.max_violation_strict]),
        )
        payload["dissipativity"] = diss.as_dict()
        if not sec.reachability_asserted:
            payload["dissipativity"]["notes"].append(
                "reachability of the trim from the boundary data was not asserted in the scenario"
            )
        diss_text = (
            f"dissipativity {'strict' if diss.strict else 'not strict'} with a={diss.alpha_a:.6g}"
            f"{' (fitted)' if diss.alpha_fitted else ''}, certified on sweep"
        )
        try:
            table = prop1_bound(diss, report.epsilons, trajs)
        except UnavailableBoundError as e:
            logger.warning(f"Time-away bound unavailable: {e}")
            payload["bound"] = {"available": False, "reason": str(e)}
            bound_text = "; bound unavailable"
        else:
            measured = np.max(report.theta_measures, axis=0)
            write_table(
                out_dir / "bound.csv",
                ["eps", "bound", "max_measure", "ok"],
                np.column_stack([table.epsilons, table.bounds, measured, measured <= table.bounds]),
            )
            payload["bound"] = {
                "available": True,
                "epsilons": table.epsilons,
                "bounds": table.bounds,
                "S_hat": table.S_hat,
                "C_cost": table.C_cost,
                "alpha_a": table.alpha_a,
                "all_measures_below": table.all_ok,
            }
            bound_text = f"; all measures below bound: {table.all_ok}"

    C = report.C_estimate
    verdict = (
        f"{scenario.raw.name}: velocity turnpike {'supported' if report.verdict else 'NOT supported'} "
        f"over T={[float(T) for T in report.horizons]}; C~{C:.4g}, ratio {report.hyperbolic_ratio:.3g}; "
        f"{diss_text}{bound_text}"
    )
    payload["verdict"] = verdict
    write_json(out_dir / "report.json", payload)
    stream.write(verdict + "\n")
    return payload

