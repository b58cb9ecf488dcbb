"""
Trims and the optimal velocity steady-state problem.

A trim of a translation-symmetric system is a pair (v_bar, u_bar) with
f(v_bar, u_bar) = 0. The optimal one minimizes l over all trims; its KKT
system reads

    f(v, u)                     = 0
    dl/dv + (df/dv)^T lambda    = 0
    dl/du + (df/du)^T lambda    = 0

and is solved by damped Newton on the stacked unknown (v, u, lambda).
"""

import logging
import concurrent.futures
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from ..config import get_settings
from ..errors import ConvergenceError, ModelValidationError, SingularMatrixError
from ..model import BoxBounds, StageCost, SystemModel, Trajectory, Trim, as_vector, check_bounds, trim_tolerance
from ..numerics import NewtonConfig, lu_solve, newton_solve

logger = logging.getLogger(__name__)

MINIMIZER_EIG_TOL = 1e-8
DEDUP_DISTANCE = 1e-6

Guess = Tuple[Sequence[float], Sequence[float], Sequence[float]]


@dataclass(frozen=True)
class SteadyStateProblem:
    system: SystemModel
    cost: StageCost
    v_guess: Optional[np.ndarray] = None
    u_guess: Optional[np.ndarray] = None
    lambda_guess: Optional[np.ndarray] = None
    bounds: Optional[BoxBounds] = None

    def __post_init__(self):
        n, m = self.system.n_q, self.system.m
        for name, size in (("v_guess", n), ("u_guess", m), ("lambda_guess", n)):
            value = getattr(self, name)
            vec = np.zeros(size) if value is None else as_vector(value, size, name)
            object.__setattr__(self, name, vec)

    @property
    def initial_guess(self) -> np.ndarray:
        return np.concatenate([self.v_guess, self.u_guess, self.lambda_guess])

    def with_guess(self, v, u=None, lam=None) -> "SteadyStateProblem":
        return replace(self, v_guess=v, u_guess=u, lambda_guess=lam)


# ---------------------------------------------------------------------------
# find_trim
# ---------------------------------------------------------------------------

def find_trim(
    system: SystemModel,
    v_fixed,
    cost: Optional[StageCost] = None,
    cfg: Optional[NewtonConfig] = None,
) -> Trim:
    """Solve f(v_fixed, u) = 0 for u starting from u = 0.

    Square input maps use damped Newton. Otherwise Gauss-Newton least squares
    is used and the trim is rejected if the final residual stays above the
    trim tolerance.
    """
    cfg = cfg or NewtonConfig()
    v = as_vector(v_fixed, system.n_q, "v_fixed")
    tol = min(cfg.tol_residual, trim_tolerance(v, np.zeros(0)))

    def residual(u: np.ndarray) -> np.ndarray:
        return np.asarray(system.f(v, u), dtype=float)

    if system.m == system.n_q:
        try:
            result = newton_solve(
                residual,
                lambda u: system.jacobians(v, u)[1],
                np.zeros(system.m),
                cfg.model_copy(update={"tol_residual": tol}),
            )
        except (ConvergenceError, SingularMatrixError) as e:
            logger.error(f"find_trim failed at v={v}: {e}")
            raise ConvergenceError(
                f"No trim found for v={v.tolist()} from u=0; try another velocity or "
                f"a multi-start over input guesses",
                getattr(e, "last_iterate", None),
                getattr(e, "residual_norm", float("nan")),
                getattr(e, "history", None),
            ) from e
        u, iterations = result.x, result.iterations
    else:
        u, iterations = _gauss_newton(residual, lambda u: system.jacobians(v, u)[1], system.m, tol, cfg)

    cost_value = float(cost.ell(v, u)) if cost is not None else float("nan")
    logger.debug(f"trim at v={v} -> u={u} in {iterations} iterations")
    return Trim(v_bar=v, u_bar=u, cost_value=cost_value, iterations=iterations)


def _gauss_newton(residual, jac, m: int, tol: float, cfg: NewtonConfig):
    u = np.zeros(m)
    r = residual(u)
    norm = float(np.linalg.norm(r))
    history = [norm]
    for iteration in range(cfg.max_iter):
        if norm <= tol:
            return u, iteration
        step, *_ = np.linalg.lstsq(jac(u), -r, rcond=None)
        u_new = u + step
        r_new = residual(u_new)
        norm_new = float(np.linalg.norm(r_new))
        if norm_new >= norm * (1.0 - 1e-12):
            # stationary least-squares point: overdetermined and infeasible
            break
        u, r, norm = u_new, r_new, norm_new
        history.append(norm)
    if norm <= tol:
        return u, len(history) - 1
    raise ConvergenceError(
        f"Least-squares trim residual {norm:.3e} exceeds tolerance {tol:.1e}; "
        f"f(v, .) has no exact root for this velocity",
        u, norm, history,
    )


# ---------------------------------------------------------------------------
# Optimal velocity steady state
# ---------------------------------------------------------------------------

def _split(z: np.ndarray, n: int, m: int):
    return z[:n], z[n:n + m], z[n + m:]


def kkt_residual(system: SystemModel, cost: StageCost, v, u, lam) -> np.ndarray:
    """Stacked steady-state KKT residual (feasibility, v-stationarity, u-stationarity)."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float)
    fv, fu = system.jacobians(v, u)
    return np.concatenate([
        np.asarray(system.f(v, u), dtype=float),
        np.asarray(cost.grad_v(v, u), dtype=float) + fv.T @ lam,
        np.asarray(cost.grad_u(v, u), dtype=float) + fu.T @ lam,
    ])


def _kkt_jacobian(system: SystemModel, cost: StageCost, v, u, lam) -> np.ndarray:
    n, m = system.n_q, system.m
    fv, fu = system.jacobians(v, u)
    A = np.hstack([fv, fu])
    H = cost.hessian(v, u) + system.weighted_hessian(v, u, lam)
    J = np.zeros((2 * n + m, 2 * n + m))
    J[:n, :n + m] = A
    J[n:, :n + m] = H
    J[n:, n + m:] = A.T
    return J


def reduced_hessian_eigenvalues(system: SystemModel, cost: StageCost, v, u, lam) -> np.ndarray:
    """Eigenvalues of the Lagrangian Hessian on the null space of [df/dv df/du]."""
    v, u, lam = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (v, u, lam))
    fv, fu = system.jacobians(v, u)
    Z = null_space(np.hstack([fv, fu]))
    if Z.shape[1] == 0:
        return np.zeros(0)
    H = cost.hessian(v, u) + system.weighted_hessian(v, u, lam)
    return np.linalg.eigvalsh(Z.T @ H @ Z)


def solve_velocity_steady_state(p: SteadyStateProblem, cfg: Optional[NewtonConfig] = None) -> Trim:
    """Newton on the steady-state KKT system from the problem's guess.

    The returned trim is flagged `is_minimizer=False` when the reduced Hessian
    has an eigenvalue below -1e-8; this is reported, not raised.
    """
    cfg = cfg or NewtonConfig()
    system, cost = p.system, p.cost
    n, m = system.n_q, system.m

    def F(z: np.ndarray) -> np.ndarray:
        return kkt_residual(system, cost, *_split(z, n, m))

    def J(z: np.ndarray) -> np.ndarray:
        return _kkt_jacobian(system, cost, *_split(z, n, m))

    try:
        result = newton_solve(F, J, p.initial_guess, cfg, solve=lu_solve)
    except ConvergenceError as e:
        logger.error(f"Steady-state Newton failed from guess {p.initial_guess}: {e}")
        raise
    v, u, lam = _split(result.x, n, m)

    feas = float(np.linalg.norm(system.f(v, u)))
    if feas > trim_tolerance(v, u):
        raise ConvergenceError(
            f"Steady state violates f(v, u) = 0 by {feas:.3e}", result.x, result.residual_norm, result.history
        )

    eigs = reduced_hessian_eigenvalues(system, cost, v, u, lam)
    is_min = bool(eigs.size == 0 or eigs[0] >= -MINIMIZER_EIG_TOL)
    if not is_min:
        logger.warning(f"Steady state at v={v}, u={u} is not a minimizer (reduced Hessian eig {eigs[0]:.3e})")

    trim = Trim(
        v_bar=v,
        u_bar=u,
        cost_value=float(cost.ell(v, u)),
        lambda_bar=lam,
        kkt_residual=result.residual_norm,
        is_minimizer=is_min,
        iterations=result.iterations,
        reduced_hessian_eigenvalues=eigs,
        bound_violations=check_bounds(p.bounds, v, u),
    )
    logger.info(
        f"Steady state v={v.tolist()} u={u.tolist()} lambda={lam.tolist()} "
        f"cost={trim.cost_value:.6g} kkt={trim.kkt_residual:.2e} in {trim.iterations} iterations"
    )
    return trim


# ---------------------------------------------------------------------------
# Multi-start
# ---------------------------------------------------------------------------

def default_guesses(p: SteadyStateProblem, spread: float = 10.0, count: int = 9) -> List[Guess]:
    """Velocity guesses along the diagonal of [-spread, spread]^n with zero input and multiplier."""
    n, m = p.system.n_q, p.system.m
    return [(np.full(n, s), np.zeros(m), np.zeros(n)) for s in np.linspace(-spread, spread, count)]


def multi_start(
    p: SteadyStateProblem,
    guesses: Iterable[Guess],
    cfg: Optional[NewtonConfig] = None,
    workers: Optional[int] = None,
) -> List[Trim]:
    """Solve from every guess concurrently; distinct trims sorted by cost.

    Trims closer than 1e-6 in (v, u) are merged, keeping the first by guess
    order. Raises ConvergenceError only if every start fails.
    """
    problems = [p.with_guess(*g) for g in guesses]
    if not problems:
        raise ModelValidationError("multi_start needs at least one guess")
    workers = workers or get_settings().sweep_workers

    results: List[Optional[Trim]] = [None] * len(problems)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(solve_velocity_steady_state, prob, cfg): i for i, prob in enumerate(problems)}
        for future in concurrent.futures.as_completed(futures):
            i = futures[future]
            try:
                results[i] = future.result()
            except (ConvergenceError, SingularMatrixError) as e:
                logger.warning(f"multi-start guess {i} failed: {e}")

    unique: List[Trim] = []
    for trim in results:
        if trim is None:
            continue
        if all(trim.distance(other) > DEDUP_DISTANCE for other in unique):
            unique.append(trim)
    if not unique:
        raise ConvergenceError(f"All {len(problems)} multi-start guesses failed")
    unique.sort(key=lambda tr: tr.cost_value)
    logger.info(f"multi-start found {len(unique)} distinct steady states from {len(problems)} guesses")
    return unique


def trim_trajectory(trim: Trim, t: Sequence[float], q0=None) -> Trajectory:
    """Trajectory riding the trim: q = q0 + v_bar (t - t0), constant (v, u), lambda_q = 0, lambda_v = lambda_bar."""
    t = np.asarray(t, dtype=float)
    n, m = trim.v_bar.size, trim.u_bar.size
    q0 = np.zeros(n) if q0 is None else as_vector(q0, n, "q0")
    lam = trim.lambda_bar if trim.lambda_bar is not None else np.zeros(n)
    k = t.size
    return Trajectory(
        t=t,
        q=q0 + np.outer(t - t[0], trim.v_bar),
        v=np.tile(trim.v_bar, (k, 1)),
        u=np.tile(trim.u_bar, (k, 1)),
        lambda_q=np.zeros((k, n)),
        lambda_v=np.tile(lam, (k, 1)),
        objective=float(trim.cost_value * (t[-1] - t[0])),
        method="trim",
    )
