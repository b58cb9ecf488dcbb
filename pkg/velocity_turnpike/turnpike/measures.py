"""
Turnpike measurements: time spent away from the trim and the hyperbolic
interior bound over a horizon sweep.
"""

import logging
import concurrent.futures
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..analytic import nu_remark
from ..config import get_settings
from ..errors import ModelValidationError
from ..model import Trajectory, Trim

logger = logging.getLogger(__name__)

DELTA_EXACT = 1e-9
DRIFT_TOLERANCE = 0.05
TRIM_MATCH = 1e-6


def deviation(traj: Trajectory, trim: Trim) -> np.ndarray:
    """Euclidean distance of (v(t), u(t)) to (v_bar, u_bar) at every node."""
    if traj.v.shape[1] != trim.v_bar.size or traj.u.shape[1] != trim.u_bar.size:
        raise ModelValidationError(
            f"Trajectory dims (v={traj.v.shape[1]}, u={traj.u.shape[1]}) do not match trim "
            f"(v={trim.v_bar.size}, u={trim.u_bar.size})"
        )
    diff = np.hstack([traj.v - trim.v_bar, traj.u - trim.u_bar])
    return np.linalg.norm(diff, axis=1)


def measure_above(t: np.ndarray, d: np.ndarray, eps: float) -> float:
    """Length of {t : d(t) > eps} for the piecewise-linear interpolant of d."""
    h = np.diff(t)
    lo = np.minimum(d[:-1], d[1:])
    hi = np.maximum(d[:-1], d[1:])
    full = eps < lo
    partial = (eps >= lo) & (eps < hi)
    span = np.where(partial, hi - lo, 1.0)
    part = np.where(partial, h * (hi - eps) / span, 0.0)
    return float(np.sum(np.where(full, h, part)))


def theta_measure(traj: Trajectory, trim: Trim, eps: float) -> float:
    """Measure of the time set where the (v, u) deviation from the trim exceeds eps."""
    if traj.t.size == 0:
        raise ModelValidationError("theta_measure needs a non-empty trajectory")
    if not eps >= 0:
        raise ModelValidationError(f"eps must be non-negative, got {eps}")
    return measure_above(traj.t, deviation(traj, trim), float(eps))


def interior_max(t: np.ndarray, values: np.ndarray, nu_bar: float) -> float:
    """max of values over nodes with t in [nu_bar, T - nu_bar]; NaN if nu_bar >= T/2."""
    rel = t - t[0]
    T = rel[-1]
    if nu_bar >= 0.5 * T:
        return float("nan")
    mask = (rel >= nu_bar) & (rel <= T - nu_bar)
    if not np.any(mask):
        return float("nan")
    return float(np.max(values[mask]))


@dataclass(frozen=True)
class HyperbolicRow:
    T: float
    max_interior_deviation: float
    T_times_max_deviation: float
    max_interior_adjoint: float
    T_times_max_adjoint: float


@dataclass(frozen=True)
class TurnpikeReport:
    trim: Trim
    horizons: np.ndarray
    epsilons: np.ndarray
    theta_measures: np.ndarray  # (len(horizons), len(epsilons))
    exact_measures: np.ndarray
    delta_exact: float
    nu_empirical: np.ndarray  # max over the sweep, per eps
    hyperbolic: List[HyperbolicRow]
    nu_bar: float
    C_estimate: float
    hyperbolic_ratio: float
    nu_bound: np.ndarray  # max(2 nu_bar, C/eps)
    eps_verdicts: np.ndarray
    verdict: bool
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict:
        return {
            "trim": {
                "v_bar": self.trim.v_bar.tolist(),
                "u_bar": self.trim.u_bar.tolist(),
                "cost_value": self.trim.cost_value,
            },
            "horizons": self.horizons.tolist(),
            "epsilons": self.epsilons.tolist(),
            "theta_measures": self.theta_measures.tolist(),
            "exact_measures": self.exact_measures.tolist(),
            "delta_exact": self.delta_exact,
            "nu_empirical": self.nu_empirical.tolist(),
            "nu_bar": self.nu_bar,
            "C_estimate": self.C_estimate,
            "hyperbolic_ratio": self.hyperbolic_ratio,
            "nu_bound": [None if not np.isfinite(x) else float(x) for x in self.nu_bound],
            "eps_verdicts": [bool(x) for x in self.eps_verdicts],
            "verdict": self.verdict,
            "hyperbolic": [asdict(row) for row in self.hyperbolic],
            "notes": list(self.notes),
        }


def _resolve_trim(trim: Union[Trim, Sequence[Trim]]) -> Trim:
    if isinstance(trim, Trim):
        return trim
    trims = list(trim)
    if not trims:
        raise ModelValidationError("At least one trim is required")
    for other in trims[1:]:
        if trims[0].distance(other) > TRIM_MATCH:
            raise ModelValidationError(
                f"Trajectories reference different trims: {trims[0].point} vs {other.point}"
            )
    return trims[0]


def _analyze(traj: Trajectory, trim: Trim, eps_grid: np.ndarray, nu_bar: float, delta_exact: float):
    d = deviation(traj, trim)
    measures = np.array([measure_above(traj.t, d, e) for e in eps_grid])
    exact = measure_above(traj.t, d, delta_exact)
    T = traj.T
    max_dev = interior_max(traj.t, d, nu_bar)
    if traj.has_adjoints and trim.lambda_bar is not None:
        adj = np.linalg.norm(traj.lambda_v - trim.lambda_bar, axis=1)
        max_adj = interior_max(traj.t, adj, nu_bar)
    else:
        max_adj = float("nan")
    row = HyperbolicRow(T, max_dev, T * max_dev, max_adj, T * max_adj)
    return measures, exact, row


def _sweep_verdicts(horizons: np.ndarray, measures: np.ndarray) -> np.ndarray:
    """Per eps: once a measure falls below its horizon, later ones may not grow beyond 5%."""
    verdicts = np.ones(measures.shape[1], dtype=bool)
    for j in range(measures.shape[1]):
        for i in range(len(horizons) - 1):
            mu_i, mu_next = measures[i, j], measures[i + 1, j]
            if mu_i < horizons[i] and mu_next > (1.0 + DRIFT_TOLERANCE) * mu_i + 1e-12:
                verdicts[j] = False
    return verdicts


def turnpike_report(
    trajectories: Sequence[Trajectory],
    trim: Union[Trim, Sequence[Trim]],
    nu_bar: float,
    eps_grid: Sequence[float],
    delta_exact: float = DELTA_EXACT,
    workers: Optional[int] = None,
) -> TurnpikeReport:
    """Measure turnpike behavior across a horizon sweep.

    Hyperbolic entries are NaN for horizons with nu_bar >= T/2. The measure
    table is rejected if any row fails to be non-increasing in eps.
    """
    trim = _resolve_trim(trim)
    if not trajectories:
        raise ModelValidationError("turnpike_report needs at least one trajectory")
    eps = np.asarray(sorted(float(e) for e in eps_grid))
    if eps.size == 0 or eps[0] < 0:
        raise ModelValidationError("eps_grid must be a non-empty list of non-negative values")
    if nu_bar < 0:
        raise ModelValidationError(f"nu_bar must be non-negative, got {nu_bar}")

    order = sorted(range(len(trajectories)), key=lambda i: trajectories[i].T)
    trajs = [trajectories[i] for i in order]
    workers = workers or get_settings().sweep_workers
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(lambda tr: _analyze(tr, trim, eps, nu_bar, delta_exact), trajs))

    horizons = np.array([tr.T for tr in trajs])
    measures = np.array([r[0] for r in results])
    exact = np.array([r[1] for r in results])
    rows = [r[2] for r in results]

    if np.any(np.diff(measures, axis=1) > 1e-12):
        raise ModelValidationError("Theta measure table is not non-increasing in eps")

    notes: List[str] = []
    scaled = np.array([row.T_times_max_deviation for row in rows])
    defined = scaled[np.isfinite(scaled)]
    if defined.size:
        C = float(np.max(defined))
        positive = defined[defined > 0]
        ratio = float(np.max(positive) / np.min(positive)) if positive.size else 1.0
    else:
        C, ratio = float("nan"), float("nan")
        notes.append(f"nu_bar={nu_bar:g} leaves no interior for any horizon; hyperbolic table undefined")
    skipped = [row.T for row in rows if not np.isfinite(row.T_times_max_deviation)]
    if skipped and defined.size:
        notes.append(f"hyperbolic entries undefined for T in {skipped} (nu_bar >= T/2)")

    eps_verdicts = _sweep_verdicts(horizons, measures)
    nu_bound = nu_remark(eps, C if np.isfinite(C) else 0.0, nu_bar)
    report = TurnpikeReport(
        trim=trim,
        horizons=horizons,
        epsilons=eps,
        theta_measures=measures,
        exact_measures=exact,
        delta_exact=delta_exact,
        nu_empirical=np.max(measures, axis=0),
        hyperbolic=rows,
        nu_bar=float(nu_bar),
        C_estimate=C,
        hyperbolic_ratio=ratio,
        nu_bound=np.atleast_1d(nu_bound),
        eps_verdicts=eps_verdicts,
        verdict=bool(np.all(eps_verdicts)),
        notes=notes,
    )
    logger.info(
        f"turnpike report over T={horizons.tolist()}: C~{C:.4g}, ratio={ratio:.3g}, verdict={report.verdict}"
    )
    return report
