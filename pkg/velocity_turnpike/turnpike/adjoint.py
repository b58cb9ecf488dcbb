"""
Detection of time intervals on which the adjoints sit at a steady-state
multiplier: lambda_v constant and lambda_q zero. On such intervals the
optimality system collapses to the steady-state KKT conditions, which are
re-checked pointwise when the system and cost are supplied.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ModelValidationError
from ..model import StageCost, SystemModel, Trajectory
from ..steady import kkt_residual

logger = logging.getLogger(__name__)

KKT_FACTOR = 10.0


@dataclass(frozen=True)
class AdjointIntervalReport:
    intervals: List[Tuple[float, float]]
    tol_const: float
    tol_zero: float
    lambda_q_max: float
    kkt_residuals: List[float] = field(default_factory=list)  # max per interval, NaN if unchecked

    @property
    def kkt_ok(self) -> bool:
        limit = KKT_FACTOR * self.tol_const
        return all(not np.isfinite(r) or r <= limit for r in self.kkt_residuals)

    def as_dict(self) -> dict:
        return {
            "intervals": [list(iv) for iv in self.intervals],
            "tol_const": self.tol_const,
            "tol_zero": self.tol_zero,
            "lambda_q_max": self.lambda_q_max,
            "kkt_residuals": self.kkt_residuals,
        }


def _grow(lam_v: np.ndarray, ok: np.ndarray, start: int, tol_const: float) -> int:
    """Last index j such that nodes start..j all pass and the spread of lambda_v stays within tol_const."""
    lo = lam_v[start].copy()
    hi = lam_v[start].copy()
    j = start
    while j + 1 < lam_v.shape[0] and ok[j + 1]:
        nlo = np.minimum(lo, lam_v[j + 1])
        nhi = np.maximum(hi, lam_v[j + 1])
        if np.max(nhi - nlo) > tol_const:
            break
        lo, hi = nlo, nhi
        j += 1
    return j


def adjoint_intervals(
    traj: Trajectory,
    tol_const: float,
    tol_zero: float,
    system: Optional[SystemModel] = None,
    cost: Optional[StageCost] = None,
) -> AdjointIntervalReport:
    """Maximal disjoint intervals (at least two nodes) with constant lambda_v and vanishing lambda_q.

    Intervals are grown greedily from the left; the scan restarts after the
    end of each accepted interval.
    """
    traj.require_adjoints()
    if not (tol_const >= 0 and tol_zero >= 0):
        raise ModelValidationError(f"Tolerances must be non-negative, got tol_const={tol_const}, tol_zero={tol_zero}")
    if (system is None) != (cost is None):
        raise ModelValidationError("The KKT check needs both the system and the stage cost")

    lam_q_abs = np.max(np.abs(traj.lambda_q), axis=1)
    ok = lam_q_abs <= tol_zero
    intervals: List[Tuple[float, float]] = []
    residuals: List[float] = []
    k, nodes = 0, traj.t.size
    while k < nodes:
        if not ok[k]:
            k += 1
            continue
        j = _grow(traj.lambda_v, ok, k, tol_const)
        if j > k:
            intervals.append((float(traj.t[k]), float(traj.t[j])))
            if system is not None:
                worst = max(
                    float(np.max(np.abs(kkt_residual(system, cost, traj.v[i], traj.u[i], traj.lambda_v[i]))))
                    for i in range(k, j + 1)
                )
            else:
                worst = float("nan")
            residuals.append(worst)
            k = j + 1
        else:
            k += 1

    report = AdjointIntervalReport(intervals, float(tol_const), float(tol_zero), float(np.max(lam_q_abs)), residuals)
    if not report.kkt_ok:
        logger.warning(
            f"steady-state KKT residuals {residuals} exceed {KKT_FACTOR * tol_const:.3g} on detected intervals"
        )
    logger.info(f"adjoint intervals: {len(intervals)} found, max |lambda_q| = {report.lambda_q_max:.3e}")
    return report
