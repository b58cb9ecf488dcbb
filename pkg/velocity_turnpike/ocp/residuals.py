"""
Pointwise residuals of the Pontryagin conditions on a sampled trajectory.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from ..model import OcpSpec, Trajectory

logger = logging.getLogger(__name__)


def time_derivative(t: np.ndarray, X: np.ndarray) -> np.ndarray:
    """d/dt of node samples X (rows = nodes).

    Uniform grids with five or more nodes use fourth-order central stencils
    (one-sided at the two outermost nodes on each side); anything else falls
    back to numpy's second-order gradient.
    """
    t = np.asarray(t, dtype=float)
    X = np.asarray(X, dtype=float)
    dt = np.diff(t)
    if t.size < 5 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        return np.gradient(X, t, axis=0, edge_order=2)
    h = dt[0]
    D = np.empty_like(X)
    D[2:-2] = (X[:-4] - 8.0 * X[1:-3] + 8.0 * X[3:-1] - X[4:]) / (12.0 * h)
    D[0] = (-25.0 * X[0] + 48.0 * X[1] - 36.0 * X[2] + 16.0 * X[3] - 3.0 * X[4]) / (12.0 * h)
    D[1] = (-3.0 * X[0] - 10.0 * X[1] + 18.0 * X[2] - 6.0 * X[3] + X[4]) / (12.0 * h)
    D[-1] = (25.0 * X[-1] - 48.0 * X[-2] + 36.0 * X[-3] - 16.0 * X[-4] + 3.0 * X[-5]) / (12.0 * h)
    D[-2] = (3.0 * X[-1] + 10.0 * X[-2] - 18.0 * X[-3] + 6.0 * X[-4] - X[-5]) / (12.0 * h)
    return D


@dataclass(frozen=True)
class PmpResidualReport:
    """Per-node residuals (nodes x n_q or nodes x m) and their norms."""

    t: np.ndarray
    lambda_q_rate: np.ndarray
    adjoint_v: np.ndarray
    stationarity: np.ndarray
    max_norms: dict
    l2_norms: dict

    @property
    def max_residual(self) -> float:
        return max(self.max_norms.values())


def _l2(t: np.ndarray, R: np.ndarray) -> float:
    return float(np.sqrt(trapezoid(np.sum(R * R, axis=1), t)))


def pmp_residuals(traj: Trajectory, spec: OcpSpec) -> PmpResidualReport:
    """Residuals of lambda_q' = 0, the lambda_v equation, and stationarity in u.

    Raises ModelValidationError when the trajectory carries no adjoints.
    """
    traj.require_adjoints()
    system, cost = spec.system, spec.cost
    t = traj.t
    dlam_q = time_derivative(t, traj.lambda_q)
    dlam_v = time_derivative(t, traj.lambda_v)

    adjoint_v = np.empty_like(traj.lambda_v)
    stationarity = np.empty_like(traj.u)
    for k in range(t.size):
        v, u, lq, lv = traj.v[k], traj.u[k], traj.lambda_q[k], traj.lambda_v[k]
        fv, fu = system.jacobians(v, u)
        adjoint_v[k] = dlam_v[k] + np.asarray(cost.grad_v(v, u)) + lq + fv.T @ lv
        stationarity[k] = np.asarray(cost.grad_u(v, u)) + fu.T @ lv

    parts = {"lambda_q_rate": dlam_q, "adjoint_v": adjoint_v, "stationarity": stationarity}
    report = PmpResidualReport(
        t=t,
        lambda_q_rate=dlam_q,
        adjoint_v=adjoint_v,
        stationarity=stationarity,
        max_norms={k: float(np.max(np.abs(R))) for k, R in parts.items()},
        l2_norms={k: _l2(t, R) for k, R in parts.items()},
    )
    logger.debug(f"PMP residuals ({traj.method}): {report.max_norms}")
    return report
