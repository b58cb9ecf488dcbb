"""
Closed-form solution of the scalar double integrator with l = 1/2 (v^2 + u^2).

The state-adjoint vector x = (q, v, lambda_q, lambda_v) obeys x' = A x with

    q'        =  v
    v'        = -lambda_v          (u = -lambda_v)
    lambda_q' =  0
    lambda_v' = -v - lambda_q

Every expression below is written with sinh(T) divided out of numerator and
denominator, so nothing overflows for long horizons. Ratios such as
sinh(x)/sinh(T) are evaluated as e^(x-T) (1 - e^(-2x)) / (1 - e^(-2T)).
"""

import math
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.integrate import trapezoid

from ..errors import ModelValidationError
from ..model import OcpSpec, SolveMethod, Trajectory, is_reference_lq

logger = logging.getLogger(__name__)

T_MIN = 1e-3
_SERIES_BELOW = 0.1

# tanh(x) - x = sum_k c_k x^(2k+1), k >= 1
_TANH_SERIES = (
    -1.0 / 3.0,
    2.0 / 15.0,
    -17.0 / 315.0,
    62.0 / 2835.0,
    -1382.0 / 155925.0,
)


@dataclass(frozen=True)
class AnalyticScenario:
    q0: float
    v0: float
    qT: float
    vT: float
    T: float

    def __post_init__(self):
        for name in ("q0", "v0", "qT", "vT", "T"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ModelValidationError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.T < T_MIN:
            raise ModelValidationError(
                f"Horizon T={self.T:g} is below T_min={T_MIN:g}: the denominator "
                f"2(cosh T - 1) - T sinh T vanishes like -T^4/12"
            )

    @classmethod
    def from_spec(cls, spec: OcpSpec) -> "AnalyticScenario":
        if not is_reference_lq(spec.system, spec.cost):
            raise ModelValidationError(
                "The closed form covers only the scalar double integrator with l = 1/2 (v^2 + u^2)"
            )
        return cls(q0=spec.q0[0], v0=spec.v0[0], qT=spec.qT[0], vT=spec.vT[0], T=spec.T)


# ---------------------------------------------------------------------------
# State-adjoint matrix
# ---------------------------------------------------------------------------

def state_adjoint_matrix() -> np.ndarray:
    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, -1.0, 0.0],
    ])


def exp_At(t: float) -> np.ndarray:
    """Matrix exponential of the state-adjoint system."""
    sh, ch = math.sinh(t), math.cosh(t)
    return np.array([
        [1.0, sh, sh - t, 1.0 - ch],
        [0.0, ch, ch - 1.0, -sh],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, -sh, -sh, ch],
    ])


# ---------------------------------------------------------------------------
# Overflow-free hyperbolic ratios
# ---------------------------------------------------------------------------

def _sinh_over_sinhT(x, T: float):
    x = np.asarray(x, dtype=float)
    return np.exp(x - T) * (-np.expm1(-2.0 * x)) / (-math.expm1(-2.0 * T))


def _cosh_over_sinhT(x, T: float):
    x = np.asarray(x, dtype=float)
    return np.exp(x - T) * (1.0 + np.exp(-2.0 * x)) / (-math.expm1(-2.0 * T))


def _inv_sinh(T: float) -> float:
    return 2.0 * math.exp(-T) / (-math.expm1(-2.0 * T))


def _coth(T: float) -> float:
    return 1.0 / math.tanh(T)


def denominator(T: float) -> float:
    """[2(cosh T - 1) - T sinh T] / sinh T = 2 tanh(T/2) - T."""
    if T < _SERIES_BELOW:
        x = 0.5 * T
        return 2.0 * sum(c * x ** (2 * k + 3) for k, c in enumerate(_TANH_SERIES))
    return 2.0 * math.tanh(0.5 * T) - T


def _b_term(s: AnalyticScenario) -> float:
    """[sinh T (qT - q0) + (1 - cosh T)(v0 + vT)] / sinh T."""
    return (s.qT - s.q0) - math.tanh(0.5 * s.T) * (s.v0 + s.vT)


def adjoint_initial_values(s: AnalyticScenario) -> Tuple[float, float]:
    """(lambda_q(0), lambda_v(0)) of the optimal solution."""
    T = s.T
    lq0 = _b_term(s) / denominator(T)
    lv0 = _coth(T) * s.v0 - _inv_sinh(T) * s.vT + math.tanh(0.5 * T) * lq0
    return lq0, lv0


# ---------------------------------------------------------------------------
# Trajectory and velocity decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityDecomposition:
    """Split of v*(t) into interpretable parts.

    boundary_term: v* for v0 = vT = 0, proportional to qT - q0.
    arc_term: incoming/leaving arcs (sinh(T-t) v0 + sinh(t) vT) / sinh T.
    coupling_term: the remaining (v0 + vT) contribution through lambda_q.
    combined_term: bracket * factor = boundary_term + coupling_term.

    boundary_term + arc_term + coupling_term == v* and
    arc_term + combined_term == v*.
    """

    t: np.ndarray
    boundary_term: np.ndarray
    arc_term: np.ndarray
    coupling_term: np.ndarray
    combined_term: np.ndarray
    bracket: np.ndarray
    factor: float

    @property
    def total(self) -> np.ndarray:
        return self.boundary_term + self.arc_term + self.coupling_term


def _check_grid(grid, T: float) -> np.ndarray:
    t = np.asarray(grid, dtype=float).reshape(-1)
    if t.size == 0:
        raise ModelValidationError("Evaluation grid is empty")
    slack = 1e-12 * max(1.0, T)
    if t.min() < -slack or t.max() > T + slack:
        raise ModelValidationError(f"Evaluation grid must lie in [0, {T:g}]")
    return np.clip(t, 0.0, T)


def _bracket(t: np.ndarray, T: float) -> np.ndarray:
    """sinh(T-t)/sinh T + sinh t/sinh T - 1."""
    return _sinh_over_sinhT(T - t, T) + _sinh_over_sinhT(t, T) - 1.0


def velocity_decomposition(s: AnalyticScenario, grid) -> VelocityDecomposition:
    T = s.T
    t = _check_grid(grid, T)
    den = denominator(T)
    bracket = _bracket(t, T)
    arc = _sinh_over_sinhT(T - t, T) * s.v0 + _sinh_over_sinhT(t, T) * s.vT
    boundary = bracket * (s.qT - s.q0) / den
    coupling = -math.tanh(0.5 * T) * (s.v0 + s.vT) * bracket / den
    factor = _b_term(s) / den
    return VelocityDecomposition(
        t=t,
        boundary_term=boundary,
        arc_term=arc,
        coupling_term=coupling,
        combined_term=bracket * factor,
        bracket=bracket,
        factor=factor,
    )


def evaluate_closed_form(s: AnalyticScenario, grid):
    """(q, v, u, lambda_q, lambda_v) sampled on grid, each of shape (len(grid),)."""
    T = s.T
    t = _check_grid(grid, T)
    lq0, _ = adjoint_initial_values(s)

    arc = _sinh_over_sinhT(T - t, T) * s.v0 + _sinh_over_sinhT(t, T) * s.vT
    v = arc + lq0 * _bracket(t, T)

    d_arc = -_cosh_over_sinhT(T - t, T) * s.v0 + _cosh_over_sinhT(t, T) * s.vT
    d_bracket = _cosh_over_sinhT(t, T) - _cosh_over_sinhT(T - t, T)
    u = d_arc + lq0 * d_bracket

    # integrals of sinh(T - tau) and sinh(tau) over [0, t], divided by sinh T
    int_left = _coth(T) - _cosh_over_sinhT(T - t, T)
    int_right = _cosh_over_sinhT(t, T) - _inv_sinh(T)
    q = s.q0 + int_left * s.v0 + int_right * s.vT + lq0 * (int_left + int_right - t)

    lam_q = np.full_like(t, lq0)
    lam_v = -u
    return q, v, u, lam_q, lam_v


def analytic_trajectory(s: AnalyticScenario, grid) -> Trajectory:
    """Closed-form optimal trajectory on `grid`; the decomposition rides in diagnostics."""
    q, v, u, lam_q, lam_v = evaluate_closed_form(s, grid)
    t = _check_grid(grid, s.T)
    lq0, lv0 = adjoint_initial_values(s)
    objective = float(trapezoid(0.5 * (v ** 2 + u ** 2), t)) if t.size > 1 else float("nan")
    return Trajectory(
        t=t,
        q=q.reshape(-1, 1),
        v=v.reshape(-1, 1),
        u=u.reshape(-1, 1),
        lambda_q=lam_q.reshape(-1, 1),
        lambda_v=lam_v.reshape(-1, 1),
        objective=objective,
        method=SolveMethod.ANALYTIC.value,
        diagnostics={
            "lambda_q0": lq0,
            "lambda_v0": lv0,
            "decomposition": velocity_decomposition(s, t),
        },
    )


def solve_analytic(spec: OcpSpec) -> Trajectory:
    """Closed-form trajectory on the OcpSpec's uniform grid."""
    s = AnalyticScenario.from_spec(spec)
    traj = analytic_trajectory(s, spec.grid)
    logger.info(f"analytic solution T={s.T:g}: lambda_q0={traj.diagnostics['lambda_q0']:.12g}")
    return traj


def combined_term_bound(s: AnalyticScenario) -> float:
    """Upper estimate 3/2 (|v0 + vT| + |qT - q0|) / T of the combined term."""
    return 1.5 * (abs(s.v0 + s.vT) + abs(s.qT - s.q0)) / s.T


def nu_remark(eps, C: float, nu_bar: float):
    """Turnpike time bound eps -> max(2 nu_bar, C / eps), infinite at eps = 0."""
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(eps_arr < 0):
        raise ModelValidationError("eps must be non-negative")
    with np.errstate(divide="ignore"):
        out = np.where(eps_arr > 0, np.maximum(2.0 * nu_bar, C / np.where(eps_arr > 0, eps_arr, 1.0)), np.inf)
    return float(out) if out.ndim == 0 else out
