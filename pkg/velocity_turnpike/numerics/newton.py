"""
Damped Newton iteration with Armijo backtracking on ||F||^2.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import ConvergenceError, ExprDomainError, IntegrationError
from .linalg import Matrix, solve_linear

logger = logging.getLogger(__name__)


class NewtonConfig(BaseModel):
    """Tolerances and line-search constants shared by every Newton solve."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tol_residual: float = Field(1e-10, gt=0)
    max_iter: int = Field(100, ge=1)
    backtrack: float = Field(0.5, gt=0, lt=1)
    armijo: float = Field(1e-4, gt=0, lt=0.5)
    min_step: float = Field(1e-10, gt=0)


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    history: List[float] = field(default_factory=list)


def newton_solve(
    F: Callable[[np.ndarray], np.ndarray],
    J: Callable[[np.ndarray], Matrix],
    x0: np.ndarray,
    cfg: Optional[NewtonConfig] = None,
    solve: Callable[[Matrix, np.ndarray], np.ndarray] = solve_linear,
) -> NewtonResult:
    """Find x with ||F(x)|| <= cfg.tol_residual.

    A guess that already satisfies the tolerance is returned unchanged after
    zero iterations. Singular Jacobians propagate as SingularMatrixError.
    """
    cfg = cfg or NewtonConfig()
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    r = np.atleast_1d(np.asarray(F(x), dtype=float))
    norm = float(np.linalg.norm(r))
    history = [norm]
    if not np.isfinite(norm):
        raise ConvergenceError("Residual is not finite at the initial guess", x, norm, history)

    for iteration in range(cfg.max_iter):
        if norm <= cfg.tol_residual:
            return NewtonResult(x, iteration, norm, history)

        step = solve(J(x), -r)
        phi0 = norm * norm
        alpha = 1.0
        while True:
            trial = x + alpha * step
            try:
                r_trial = np.atleast_1d(np.asarray(F(trial), dtype=float))
                n_trial = float(np.linalg.norm(r_trial))
            except (ExprDomainError, IntegrationError, FloatingPointError):
                n_trial = float("inf")
            if np.isfinite(n_trial) and n_trial * n_trial <= (1.0 - 2.0 * cfg.armijo * alpha) * phi0:
                break
            alpha *= cfg.backtrack
            if alpha < cfg.min_step:
                raise ConvergenceError(
                    f"Line search stalled after {iteration} Newton iterations",
                    x, norm, history,
                )

        x, r, norm = trial, r_trial, n_trial
        history.append(norm)
        logger.debug(f"newton iter {iteration + 1}: |F|={norm:.3e} step={alpha:g}")

    if norm <= cfg.tol_residual:
        return NewtonResult(x, cfg.max_iter, norm, history)
    raise ConvergenceError(
        f"Newton did not converge in {cfg.max_iter} iterations", x, norm, history
    )
