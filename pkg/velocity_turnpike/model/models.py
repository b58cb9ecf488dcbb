"""
Domain types shared by the solvers and analyzers.

All records are frozen after construction; numpy arrays held by them are
marked read-only so trajectories can be handed between threads.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..errors import ModelValidationError

logger = logging.getLogger(__name__)

VectorMap = Callable[[np.ndarray, np.ndarray], np.ndarray]
ScalarMap = Callable[[np.ndarray, np.ndarray], float]

FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


class SolveMethod(str, Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"
    ANALYTIC = "analytic"


def as_vector(x: Any, size: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """Coerce scalars/lists to a 1-D float array, checking the length if given."""
    arr = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if size is not None and arr.size != size:
        raise ModelValidationError(f"{name} must have dimension {size}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ModelValidationError(f"{name} contains non-finite entries")
    return arr


def _frozen(arr: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if arr is None:
        return None
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# System and cost
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemModel:
    """Translation-symmetric mechanical system q' = v, v' = f(v, u)."""

    name: str
    n_q: int
    m: int
    f: VectorMap
    df_dv: VectorMap
    df_du: VectorMap
    hess_f: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_q < 1 or self.m < 1:
            raise ModelValidationError(f"System '{self.name}' needs n_q >= 1 and m >= 1")

    @property
    def n_state(self) -> int:
        return 2 * self.n_q

    def jacobians(self, v: np.ndarray, u: np.ndarray):
        fv = np.asarray(self.df_dv(v, u), dtype=float).reshape(self.n_q, self.n_q)
        fu = np.asarray(self.df_du(v, u), dtype=float).reshape(self.n_q, self.m)
        return fv, fu

    def weighted_hessian(self, v: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Hessian of w^T f over the stacked (v, u) vector."""
        if self.hess_f is not None:
            return np.asarray(self.hess_f(v, u, w), dtype=float)
        n = self.n_q
        x = np.concatenate([v, u])

        def grad(z: np.ndarray) -> np.ndarray:
            fv, fu = self.jacobians(z[:n], z[n:])
            return np.concatenate([fv.T @ w, fu.T @ w])

        H = np.empty((x.size, x.size))
        for i in range(x.size):
            h = FD_STEP * (1.0 + abs(x[i]))
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            H[:, i] = (grad(xp) - grad(xm)) / (2.0 * h)
        return 0.5 * (H + H.T)


@dataclass(frozen=True)
class StageCost:
    """Stage cost l(v, u) with gradients and Hessians; no q argument."""

    name: str
    ell: ScalarMap
    grad_v: VectorMap
    grad_u: VectorMap
    hess_vv: VectorMap
    hess_uu: VectorMap
    hess_vu: VectorMap
    params: Dict[str, Any] = field(default_factory=dict)

    def hessian(self, v: np.ndarray, u: np.ndarray) -> np.ndarray:
        v, u = np.atleast_1d(np.asarray(v, dtype=float)), np.atleast_1d(np.asarray(u, dtype=float))
        n, m = v.size, u.size
        H = np.empty((n + m, n + m))
        H[:n, :n] = np.asarray(self.hess_vv(v, u)).reshape(n, n)
        H[n:, n:] = np.asarray(self.hess_uu(v, u)).reshape(m, m)
        H[:n, n:] = np.asarray(self.hess_vu(v, u)).reshape(n, m)
        H[n:, :n] = H[:n, n:].T
        return H


# ---------------------------------------------------------------------------
# Optimal control problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxBounds:
    """Optional box on v and u; metadata for post-hoc admissibility checks only."""

    v_lower: Optional[np.ndarray] = None
    v_upper: Optional[np.ndarray] = None
    u_lower: Optional[np.ndarray] = None
    u_upper: Optional[np.ndarray] = None


@dataclass(frozen=True)
class OcpSpec:
    system: SystemModel
    cost: StageCost
    T: float
    q0: np.ndarray
    v0: np.ndarray
    qT: np.ndarray
    vT: np.ndarray
    N: int
    bounds: Optional[BoxBounds] = None

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ModelValidationError(f"Horizon T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 2:
            raise ModelValidationError(f"Grid size N must be an integer >= 2, got {self.N}")
        n = self.system.n_q
        for name in ("q0", "v0", "qT", "vT"):
            object.__setattr__(self, name, _frozen(as_vector(getattr(self, name), n, name)))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    def shifted(self, g: np.ndarray) -> "OcpSpec":
        """Same problem with both boundary configurations translated by g."""
        g = as_vector(g, self.system.n_q, "shift")
        return replace(self, q0=self.q0 + g, qT=self.qT + g)

    def with_horizon(self, T: float, N: Optional[int] = None) -> "OcpSpec":
        return replace(self, T=T, N=self.N if N is None else N)


# ---------------------------------------------------------------------------
# Solution objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Sampled primal-dual solution; arrays are (nodes, dim)."""

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    u: np.ndarray
    lambda_q: Optional[np.ndarray] = None
    lambda_v: Optional[np.ndarray] = None
    objective: float = float("nan")
    method: str = ""
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        if t.size < 2:
            raise ModelValidationError("Trajectory needs at least two samples")
        if not np.all(np.diff(t) > 0):
            raise ModelValidationError("Trajectory time grid must be strictly increasing")
        object.__setattr__(self, "t", _frozen(t))
        for name in ("q", "v", "u", "lambda_q", "lambda_v"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            if arr.shape[0] != t.size:
                raise ModelValidationError(
                    f"Trajectory field '{name}' has {arr.shape[0]} samples, grid has {t.size}"
                )
            object.__setattr__(self, name, _frozen(arr))
        if (self.lambda_q is None) != (self.lambda_v is None):
            raise ModelValidationError("lambda_q and lambda_v must be given together")

    @property
    def T(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def has_adjoints(self) -> bool:
        return self.lambda_q is not None

    def require_adjoints(self) -> None:
        if not self.has_adjoints:
            raise ModelValidationError(f"Trajectory from '{self.method or 'unknown'}' carries no adjoints")

    def boundary_errors(self, spec: OcpSpec) -> Dict[str, float]:
        return {
            "q0": float(np.linalg.norm(self.q[0] - spec.q0)),
            "v0": float(np.linalg.norm(self.v[0] - spec.v0)),
            "qT": float(np.linalg.norm(self.q[-1] - spec.qT)),
            "vT": float(np.linalg.norm(self.v[-1] - spec.vT)),
        }


@dataclass(frozen=True)
class Trim:
    """Velocity steady state (v_bar, u_bar) with f(v_bar, u_bar) = 0."""

    v_bar: np.ndarray
    u_bar: np.ndarray
    cost_value: float
    lambda_bar: Optional[np.ndarray] = None
    kkt_residual: float = float("nan")
    is_minimizer: Optional[bool] = None
    iterations: int = 0
    reduced_hessian_eigenvalues: Optional[np.ndarray] = None
    bound_violations: List[str] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "v_bar", _frozen(as_vector(self.v_bar, name="v_bar")))
        object.__setattr__(self, "u_bar", _frozen(as_vector(self.u_bar, name="u_bar")))
        if self.lambda_bar is not None:
            object.__setattr__(self, "lambda_bar", _frozen(as_vector(self.lambda_bar, name="lambda_bar")))
        if self.reduced_hessian_eigenvalues is not None:
            object.__setattr__(self, "reduced_hessian_eigenvalues", _frozen(self.reduced_hessian_eigenvalues))

    @property
    def point(self) -> np.ndarray:
        return np.concatenate([self.v_bar, self.u_bar])

    def distance(self, other: "Trim") -> float:
        return float(np.linalg.norm(self.point - other.point))


def trim_tolerance(v: np.ndarray, u: np.ndarray) -> float:
    return 1e-10 * (1.0 + float(np.linalg.norm(v)) + float(np.linalg.norm(u)))
