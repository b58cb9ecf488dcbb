"""
Indirect (Pontryagin) shooting on the state-adjoint system.

With H = l(v, u) + lambda_q^T v + lambda_v^T f(v, u) the necessary
conditions are

    q'        = v
    v'        = f(v, u)
    lambda_q' = 0
    lambda_v' = -dl/dv - lambda_q - (df/dv)^T lambda_v
    0         = dl/du + (df/du)^T lambda_v

The control is eliminated pointwise by Newton on the last line (from u = 0)
and the unknown initial adjoint is found by Newton on the terminal misfit.
With `segments > 1` interior segment states become extra unknowns joined by
continuity residuals. Left to `None`, the segment count is picked from the
sensitivity of the single-shooting map so that no segment amplifies
perturbations by more than MAX_SEGMENT_GROWTH.
"""

import math
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import (
    ConvergenceError,
    ExprDomainError,
    IntegrationError,
    ModelValidationError,
    SingularMatrixError,
)
from ..model import OcpSpec, SolveMethod, Trajectory, as_vector, check_bounds, trapezoid_objective
from ..numerics import NewtonConfig, lu_solve, newton_solve, rk4_integrate
from .collocation import solve_direct, stationary_control

logger = logging.getLogger(__name__)

FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)
MAX_SEGMENT_GROWTH = 1e2
SHOOTING_FAILURES = (ConvergenceError, SingularMatrixError, IntegrationError, ExprDomainError)


class ShootingProblem:
    """Boundary-value map (initial adjoint, segment states) -> misfit."""

    def __init__(self, spec: OcpSpec, cfg: Optional[NewtonConfig] = None, segments: int = 1):
        if int(segments) != segments or segments < 1:
            raise ModelValidationError(f"segments must be a positive integer, got {segments}")
        if segments > spec.N:
            raise ModelValidationError(f"segments={segments} exceeds the grid size N={spec.N}")
        self.spec = spec
        self.system = spec.system
        self.cost = spec.cost
        self.n = spec.system.n_q
        self.cfg = cfg or NewtonConfig()
        self.segments = int(segments)
        self.t = spec.grid
        self.breaks = [round(j * spec.N / self.segments) for j in range(self.segments + 1)]
        self._jac_cache: Tuple[Optional[bytes], Optional[np.ndarray]] = (None, None)

    # ---------- control law and dynamics ----------

    def control(self, v: np.ndarray, lam_v: np.ndarray, t: float = float("nan")) -> np.ndarray:
        return stationary_control(self.system, self.cost, v, lam_v, self.cfg, t=t)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.n
        v, lam_q, lam_v = y[n:2 * n], y[2 * n:3 * n], y[3 * n:]
        u = self.control(v, lam_v, t)
        fv = self.system.jacobians(v, u)[0]
        return np.concatenate([
            v,
            np.asarray(self.system.f(v, u), dtype=float),
            np.zeros(n),
            -np.asarray(self.cost.grad_v(v, u), dtype=float) - lam_q - fv.T @ lam_v,
        ])

    # ---------- unknowns ----------

    @property
    def size(self) -> int:
        return 2 * self.n + 4 * self.n * (self.segments - 1)

    def initial_state(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([self.spec.q0, self.spec.v0, x[:2 * self.n]])

    def unknown_block(self, j: int) -> slice:
        """Entries of x that seed segment j."""
        if j == 0:
            return slice(0, 2 * self.n)
        start = 2 * self.n + 4 * self.n * (j - 1)
        return slice(start, start + 4 * self.n)

    def misfit_block(self, j: int) -> slice:
        """Entries of the misfit fed by the end of segment j."""
        width = 2 * self.n if j == self.segments - 1 else 4 * self.n
        return slice(4 * self.n * j, 4 * self.n * j + width)

    def segment_starts(self, x: np.ndarray) -> List[np.ndarray]:
        starts = [self.initial_state(x)]
        for j in range(1, self.segments):
            starts.append(x[self.unknown_block(j)])
        return starts

    def pack(self, lam0: np.ndarray, states: Optional[np.ndarray] = None) -> np.ndarray:
        """Unknown vector from an initial adjoint and optional node states (N+1, 4n)."""
        parts = [np.asarray(lam0, dtype=float)]
        for j in range(1, self.segments):
            if states is None:
                raise ModelValidationError("Multiple shooting guesses need segment states")
            parts.append(np.asarray(states[self.breaks[j]], dtype=float))
        return np.concatenate(parts)

    def integrate_segment(self, j: int, y0: np.ndarray) -> np.ndarray:
        a, b = self.breaks[j], self.breaks[j + 1]
        _, Y = rk4_integrate(self.rhs, y0, self.t[a], self.t[b], b - a)
        return Y

    def integrate(self, x: np.ndarray):
        """Integrate every segment; returns (list of segment sample arrays, end states)."""
        samples = [self.integrate_segment(j, y0) for j, y0 in enumerate(self.segment_starts(x))]
        return samples, [Y[-1] for Y in samples]

    def misfit(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        _, ends = self.integrate(x)
        starts = self.segment_starts(x)
        parts = [ends[j] - starts[j + 1] for j in range(self.segments - 1)]
        parts.append(ends[-1][:2 * n] - np.concatenate([self.spec.qT, self.spec.vT]))
        return np.concatenate(parts)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Central-difference Jacobian of the misfit, cached for the last x.

        Segment j only depends on its own seed, so each column costs one
        segment integration pair instead of a full sweep.
        """
        key = x.tobytes()
        if self._jac_cache[0] == key:
            return self._jac_cache[1]
        J = np.zeros((self.size, self.size))
        starts = self.segment_starts(x)
        for j in range(self.segments):
            rows, cols = self.misfit_block(j), self.unknown_block(j)
            width = rows.stop - rows.start
            # segment 0 is seeded by the adjoint part of its start state only
            offset = 2 * self.n if j == 0 else 0
            for c, i in enumerate(range(cols.start, cols.stop)):
                h = FD_STEP * (1.0 + abs(x[i]))
                yp, ym = starts[j].copy(), starts[j].copy()
                yp[offset + c] += h
                ym[offset + c] -= h
                end_p = self.integrate_segment(j, yp)[-1]
                end_m = self.integrate_segment(j, ym)[-1]
                J[rows, i] = (end_p[:width] - end_m[:width]) / (2.0 * h)
            if j > 0:
                J[self.misfit_block(j - 1), cols] -= np.eye(4 * self.n)
        self._jac_cache = (key, J)
        return J

    # ---------- extraction ----------

    def to_trajectory(self, x: np.ndarray, diagnostics: Dict) -> Trajectory:
        n = self.n
        samples, _ = self.integrate(x)
        Y = np.vstack([samples[0]] + [S[1:] for S in samples[1:]])
        U = np.array([self.control(Y[k, n:2 * n], Y[k, 3 * n:], self.t[k]) for k in range(Y.shape[0])])
        lam_q = Y[:, 2 * n:3 * n]
        diagnostics = {
            **diagnostics,
            "lambda_q0": Y[0, 2 * n:3 * n].copy(),
            "lambda_v0": Y[0, 3 * n:].copy(),
            "lambda_q_drift": float(np.max(np.abs(lam_q - lam_q[0]))),
            "bound_violations": check_bounds(self.spec.bounds, Y[:, n:2 * n], U),
        }
        return Trajectory(
            t=self.t,
            q=Y[:, :n],
            v=Y[:, n:2 * n],
            u=U,
            lambda_q=lam_q,
            lambda_v=Y[:, 3 * n:],
            objective=trapezoid_objective(self.cost, self.t, Y[:, n:2 * n], U),
            method=SolveMethod.INDIRECT.value,
            diagnostics=diagnostics,
        )


def sensitivity_norm(J: np.ndarray) -> float:
    return max(1.0, float(np.max(np.sum(np.abs(J), axis=1))))


def choose_segments(spec: OcpSpec, cfg: NewtonConfig, lam0: np.ndarray) -> int:
    """Fewest segments keeping each segment's amplification near MAX_SEGMENT_GROWTH."""
    single = ShootingProblem(spec, cfg, 1)
    try:
        scale = sensitivity_norm(single.jacobian(single.pack(lam0)))
    except SHOOTING_FAILURES as e:
        segments = min(spec.N, max(2, math.ceil(spec.T)))
        logger.warning(f"single-shooting sensitivity unavailable ({e}); using {segments} segments")
        return segments
    if not np.isfinite(scale):
        return min(spec.N, max(2, math.ceil(spec.T)))
    segments = 1 if scale <= MAX_SEGMENT_GROWTH else math.ceil(math.log(scale) / math.log(MAX_SEGMENT_GROWTH))
    segments = min(spec.N, segments)
    logger.debug(f"single-shooting sensitivity {scale:.3e} -> {segments} segment(s)")
    return segments


def _shoot(prob: ShootingProblem, x0: np.ndarray) -> Tuple[np.ndarray, Dict]:
    """Newton on the misfit scaled by the first-iterate sensitivity, then on the raw misfit.

    The raw stage runs only when the scaled stop leaves the terminal residual
    above tol_residual; it raises ConvergenceError when that tolerance is out
    of reach.
    """
    scale = sensitivity_norm(prob.jacobian(x0))
    result = newton_solve(
        lambda x: prob.misfit(x) / scale,
        lambda x: prob.jacobian(x) / scale,
        x0,
        prob.cfg,
        solve=lu_solve,
    )
    x, iterations, history = result.x, result.iterations, list(result.history)
    raw = float(np.linalg.norm(prob.misfit(x)))
    if raw > prob.cfg.tol_residual:
        logger.debug(f"scaled shooting stop left |misfit|={raw:.2e}; continuing on the raw misfit")
        polished = newton_solve(prob.misfit, prob.jacobian, x, prob.cfg, solve=lu_solve)
        x, raw = polished.x, polished.residual_norm
        iterations += polished.iterations
        history += polished.history
    return x, {
        "iterations": iterations,
        "scaled_residual": result.residual_norm,
        "residual_scale": scale,
        "terminal_residual": raw,
        "history": history,
    }


def solve_indirect(
    spec: OcpSpec,
    cfg: Optional[NewtonConfig] = None,
    guess: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
    segments: Optional[int] = None,
    warm_start: bool = True,
) -> Trajectory:
    """Solve the OCP by shooting on the initial adjoint (lambda_q(0), lambda_v(0)).

    Converged solutions satisfy |misfit| <= cfg.tol_residual on the unscaled
    terminal and continuity residuals, reported as `terminal_residual`.
    `segments=None` picks the segment count from the single-shooting
    sensitivity; an explicit count is used as given.
    When the default start fails and `warm_start` is set, the collocation
    solver's multiplier estimates seed a second attempt.
    """
    cfg = cfg or NewtonConfig()
    n = spec.system.n_q
    if guess is None:
        lam0 = np.zeros(2 * n)
    else:
        lam0 = np.concatenate([as_vector(guess[0], n, "lambda_q0 guess"), as_vector(guess[1], n, "lambda_v0 guess")])
    if segments is None:
        segments = choose_segments(spec, cfg, lam0)
    prob = ShootingProblem(spec, cfg, segments)
    states = None
    if prob.segments > 1:
        # straight-line states with the guessed adjoint as the segment seeds
        s = (prob.t / spec.T)[:, None]
        states = np.hstack([
            (1.0 - s) * spec.q0 + s * spec.qT,
            (1.0 - s) * spec.v0 + s * spec.vT,
            np.tile(lam0, (spec.N + 1, 1)),
        ])
    logger.info(f"indirect shooting: T={spec.T:g} N={spec.N} segments={prob.segments}")

    warm_started = False
    try:
        x, diag = _shoot(prob, prob.pack(lam0, states))
    except SHOOTING_FAILURES as first:
        if not warm_start:
            logger.error(f"indirect shooting failed: {first}")
            raise
        logger.warning(f"indirect shooting from the default guess failed ({first}); warm-starting from collocation")
        direct = solve_direct(spec, prob.cfg)
        warm_states = np.hstack([direct.q, direct.v, direct.lambda_q, direct.lambda_v])
        prob = ShootingProblem(spec, cfg, prob.segments)
        try:
            x, diag = _shoot(prob, prob.pack(warm_states[0, 2 * n:], warm_states))
        except SHOOTING_FAILURES as second:
            logger.error(f"indirect shooting failed after warm start: {second}")
            raise ConvergenceError(
                f"Indirect shooting did not converge from the zero adjoint or the collocation warm start: {second}",
                getattr(second, "last_iterate", None),
                getattr(second, "residual_norm", float("nan")),
                getattr(second, "history", None),
            ) from second
        warm_started = True

    traj = prob.to_trajectory(x, {**diag, "converged": True, "segments": prob.segments, "warm_started": warm_started})
    logger.info(
        f"indirect shooting converged in {diag['iterations']} iterations, "
        f"terminal residual {diag['terminal_residual']:.2e}, objective={traj.objective:.10g}"
    )
    return traj
