"""
Dissipativity checks along sampled optimal trajectories and the resulting
bound on the time spent away from the trim.

With supply rate w(v, u) = l(v, u) - l(v_bar, u_bar), storage S and
alpha(s) = a s^2, every node pair t_i < t_j is checked for

    S(x(t_j)) - S(x(t_i)) <= int_{t_i}^{t_j} w dt                       (plain)
    S(x(t_j)) - S(x(t_i)) <= int_{t_i}^{t_j} w - alpha(|(v,u) - trim|) dt  (strict)

Writing A = S - cumulative integral, a pair violates iff A_j - A_i > 0, so
the worst pair ending at j is found from the running minimum of A in O(N).
Results are evidence on the sampled sweep, not a proof for all initial states.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..errors import InvalidStorageError, ModelValidationError, UnavailableBoundError
from ..model import StageCost, Trajectory, Trim
from .measures import deviation, theta_measure

logger = logging.getLogger(__name__)

VIOLATION_TOL = 1e-9
ALPHA_MAX = 10.0
BISECTION_STEPS = 80


class StorageKind(str, Enum):
    ZERO = "zero"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class Storage:
    """S = 0 or S(q, v) = 1/2 (x - x_ref)^T P (x - x_ref) with x = (q, v).

    x_ref defaults to (0, v_bar) of the trim the check is run against.
    """

    kind: StorageKind = StorageKind.ZERO
    P: Optional[np.ndarray] = None
    q_ref: Optional[np.ndarray] = None
    v_ref: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == StorageKind.QUADRATIC:
            if self.P is None:
                raise ModelValidationError("Quadratic storage needs a matrix P")
            P = np.atleast_2d(np.asarray(self.P, dtype=float))
            if P.shape[0] != P.shape[1] or P.shape[0] % 2:
                raise ModelValidationError(f"P must be square of size 2 n_q, got shape {P.shape}")
            if not np.allclose(P, P.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(P))))):
                raise ModelValidationError("P must be symmetric")
            object.__setattr__(self, "P", P)

    def describe(self) -> str:
        if self.kind == StorageKind.ZERO:
            return "S = 0"
        return f"S = 1/2 (x - x_ref)^T P (x - x_ref), P = {self.P.tolist()}"

    def evaluate(self, traj: Trajectory, trim: Trim) -> np.ndarray:
        if self.kind == StorageKind.ZERO:
            return np.zeros(traj.t.size)
        n = traj.q.shape[1]
        if self.P.shape[0] != 2 * n:
            raise ModelValidationError(f"P must be {2 * n}x{2 * n} for n_q={n}")
        q_ref = np.zeros(n) if self.q_ref is None else np.asarray(self.q_ref, dtype=float)
        v_ref = trim.v_bar if self.v_ref is None else np.asarray(self.v_ref, dtype=float)
        X = np.hstack([traj.q - q_ref, traj.v - v_ref])
        S = 0.5 * np.einsum("ki,ij,kj->k", X, self.P, X)
        worst = float(np.min(S))
        if worst < -VIOLATION_TOL:
            k = int(np.argmin(S))
            raise InvalidStorageError(
                f"Storage takes the negative value {worst:.3e} at t={traj.t[k]:.6g}; "
                f"storage functions must be non-negative"
            )
        return S


@dataclass(frozen=True)
class Violation:
    trajectory: int
    T: float
    inequality: str  # "plain" or "strict"
    t_start: float
    t_end: float
    margin: float


@dataclass(frozen=True)
class DissipativityReport:
    storage: Storage
    trim: Trim
    horizons: List[float]
    supply_integrals: List[float]
    cumulative_supply: List[np.ndarray]
    alpha_a: float
    alpha_fitted: bool
    max_violation_plain: List[float]
    max_violation_strict: List[float]
    violations: List[Violation]
    S_hat: float
    C_cost: float
    strict: bool
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "storage": self.storage.describe(),
            "horizons": self.horizons,
            "supply_integrals": self.supply_integrals,
            "alpha_a": self.alpha_a,
            "alpha_fitted": self.alpha_fitted,
            "max_violation_plain": self.max_violation_plain,
            "max_violation_strict": self.max_violation_strict,
            "violations": [v.__dict__ for v in self.violations[:50]],
            "violation_count": len(self.violations),
            "S_hat": self.S_hat,
            "C_cost": self.C_cost,
            "strict": self.strict,
            "notes": list(self.notes),
        }


@dataclass
class _Sampled:
    t: np.ndarray
    S: np.ndarray
    w: np.ndarray
    d2: np.ndarray
    W: np.ndarray  # cumulative supply
    D2: np.ndarray  # cumulative squared deviation


def _gaps(A: np.ndarray) -> np.ndarray:
    """For each j >= 1: max_{i<j} (A_j - A_i); -inf at j = 0."""
    gaps = np.full(A.size, -np.inf)
    gaps[1:] = A[1:] - np.minimum.accumulate(A)[:-1]
    return gaps


def _argmin_before(A: np.ndarray) -> np.ndarray:
    arg = np.zeros(A.size, dtype=int)
    best = 0
    for j in range(1, A.size):
        if A[j - 1] < A[best]:
            best = j - 1
        arg[j] = best
    return arg


def _max_violation(s: _Sampled, a: float) -> float:
    A = s.S - (s.W - a * s.D2)
    return float(np.max(_gaps(A)[1:]))


def _sample(traj: Trajectory, trim: Trim, storage: Storage, cost: StageCost) -> _Sampled:
    w = np.array([cost.ell(traj.v[k], traj.u[k]) for k in range(traj.t.size)]) - trim.cost_value
    d2 = deviation(traj, trim) ** 2
    return _Sampled(
        t=traj.t,
        S=storage.evaluate(traj, trim),
        w=w,
        d2=d2,
        W=cumulative_trapezoid(w, traj.t, initial=0.0),
        D2=cumulative_trapezoid(d2, traj.t, initial=0.0),
    )


def _fit_alpha(samples: Sequence["_Sampled"], a_max: float = ALPHA_MAX) -> float:
    """Largest a in (0, a_max] keeping every strict violation within 1e-9 (0 if none)."""
    def feasible(a: float) -> bool:
        return all(_max_violation(s, a) <= VIOLATION_TOL for s in samples)

    if feasible(a_max):
        return a_max
    lo, hi = 0.0, a_max
    if not feasible(lo):
        return 0.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _collect(index: int, s: _Sampled, T: float, a: float, label: str) -> List[Violation]:
    A = s.S - (s.W - a * s.D2)
    gaps = _gaps(A)
    out = []
    if not np.any(gaps > VIOLATION_TOL):
        return out
    arg = _argmin_before(A)
    for j in np.flatnonzero(gaps > VIOLATION_TOL):
        out.append(Violation(index, T, label, float(s.t[arg[j]]), float(s.t[j]), float(gaps[j])))
    return out


def check_dissipativity(
    trajectories: Sequence[Trajectory],
    trim: Trim,
    storage: Optional[Storage] = None,
    alpha_a: Union[float, str, None] = "fit",
    cost: Optional[StageCost] = None,
) -> DissipativityReport:
    """Check the plain and strict dissipation inequalities on every node pair.

    Args:
        storage: storage candidate; S = 0 when omitted.
        alpha_a: coefficient a of alpha(s) = a s^2, or "fit" to bisect for the
            largest admissible a in (0, 10].
        cost: stage cost defining the supply rate.
    """
    if cost is None:
        raise ModelValidationError("check_dissipativity needs the stage cost to form the supply rate")
    if not trajectories:
        raise ModelValidationError("check_dissipativity needs at least one trajectory")
    storage = storage or Storage()
    samples = [_sample(tr, trim, storage, cost) for tr in trajectories]

    fitted = isinstance(alpha_a, str) or alpha_a is None
    if fitted:
        if alpha_a not in (None, "fit"):
            raise ModelValidationError(f"alpha_a must be a number or 'fit', got {alpha_a!r}")
        a = _fit_alpha(samples)
    else:
        a = float(alpha_a)
        if a < 0:
            raise ModelValidationError(f"alpha_a must be non-negative, got {a}")

    horizons = [tr.T for tr in trajectories]
    violations: List[Violation] = []
    plain, strict_v = [], []
    for i, (s, T) in enumerate(zip(samples, horizons)):
        plain.append(_max_violation(s, 0.0))
        strict_v.append(_max_violation(s, a))
        violations.extend(_collect(i, s, T, 0.0, "plain"))
        if a > 0:
            violations.extend(_collect(i, s, T, a, "strict"))

    strict = a > 0 and all(v <= VIOLATION_TOL for v in strict_v)
    notes = ["certified on sweep: inequalities checked on sampled optimal trajectories only"]
    report = DissipativityReport(
        storage=storage,
        trim=trim,
        horizons=horizons,
        supply_integrals=[float(s.W[-1]) for s in samples],
        cumulative_supply=[s.W for s in samples],
        alpha_a=a,
        alpha_fitted=fitted,
        max_violation_plain=plain,
        max_violation_strict=strict_v,
        violations=violations,
        S_hat=float(max(np.max(s.S) for s in samples)),
        C_cost=float(max(s.W[-1] for s in samples)),
        strict=strict,
        notes=notes,
    )
    logger.info(
        f"dissipativity: a={a:.6g} ({'fitted' if fitted else 'given'}), strict={strict}, "
        f"violations={len(violations)}, S_hat={report.S_hat:.3g}, C_cost={report.C_cost:.6g}"
    )
    return report


# ---------------------------------------------------------------------------
# Time-away bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    T: float
    eps: float
    measure: float
    bound: float
    ok: bool


@dataclass(frozen=True)
class BoundTable:
    epsilons: np.ndarray
    bounds: np.ndarray
    S_hat: float
    C_cost: float
    alpha_a: float
    checks: List[BoundCheck] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return all(c.ok for c in self.checks)


def prop1_bound(
    report: DissipativityReport,
    eps_grid: Sequence[float],
    trajectories: Sequence[Trajectory] = (),
) -> BoundTable:
    """(2 S_hat + C_cost) / (a eps^2) per eps, cross-checked against measured times.

    Raises UnavailableBoundError without a strict certificate.
    """
    if not report.strict or report.alpha_a <= 0:
        raise UnavailableBoundError(
            "No strict dissipativity certificate (a > 0 without violations) is available for the bound"
        )
    if not np.isfinite(report.C_cost):
        raise UnavailableBoundError("Performance bound C_cost is not finite")
    eps = np.asarray([float(e) for e in eps_grid])
    if np.any(eps < 0):
        raise ModelValidationError("eps values must be non-negative")
    numerator = 2.0 * report.S_hat + report.C_cost
    with np.errstate(divide="ignore"):
        bounds = np.where(eps > 0, numerator / (report.alpha_a * np.where(eps > 0, eps, 1.0) ** 2), np.inf)

    checks: List[BoundCheck] = []
    for traj in trajectories:
        for e, b in zip(eps, bounds):
            mu = theta_measure(traj, report.trim, e)
            checks.append(BoundCheck(traj.T, float(e), mu, float(b), bool(mu <= b * (1.0 + 1e-12))))
    failed = [c for c in checks if not c.ok]
    if failed:
        logger.warning(f"{len(failed)} measured times exceed the dissipativity bound, first: {failed[0]}")
    return BoundTable(eps, bounds, report.S_hat, report.C_cost, report.alpha_a, checks)
