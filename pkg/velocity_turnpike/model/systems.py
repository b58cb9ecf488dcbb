"""
Built-in systems, cost builders and helpers that act on a SystemModel.
"""

import re
import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from ..errors import ModelValidationError, UnknownSystemError
from ..exprlang import evaluate, hessian_fd, parse, to_source
from ..numerics import rk4_step
from .models import BoxBounds, StageCost, SystemModel, as_vector

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def double_integrator(n: int = 1) -> SystemModel:
    """v' = u, component-wise."""
    eye = np.eye(n)
    return SystemModel(
        name="double_integrator",
        n_q=n,
        m=n,
        f=lambda v, u: np.array(u, dtype=float),
        df_dv=lambda v, u: np.zeros((n, n)),
        df_du=lambda v, u: eye,
        hess_f=lambda v, u, w: np.zeros((2 * n, 2 * n)),
        params={"n": n},
    )


def damped_integrator(c: float = 0.5, n: int = 1) -> SystemModel:
    """v' = u - c v, component-wise."""
    if not np.isfinite(c):
        raise ModelValidationError(f"Damping coefficient must be finite, got {c}")
    eye = np.eye(n)
    return SystemModel(
        name="damped_integrator",
        n_q=n,
        m=n,
        f=lambda v, u: np.asarray(u, dtype=float) - c * np.asarray(v, dtype=float),
        df_dv=lambda v, u: -c * eye,
        df_du=lambda v, u: eye,
        hess_f=lambda v, u, w: np.zeros((2 * n, 2 * n)),
        params={"c": float(c), "n": n},
    )


_REGISTRY: Dict[str, Callable[..., SystemModel]] = {
    "double_integrator": double_integrator,
    "damped_integrator": damped_integrator,
}

# accepts "damped_integrator(0.5)" as shorthand for c=0.5
_CALL_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*\(\s*([^)]*?)\s*\)\s*$")


def available_systems() -> List[str]:
    return sorted(_REGISTRY)


def builtin_system(name: str, **params) -> SystemModel:
    """Look up a registered system by name.

    Args:
        name: registry key, optionally with a positional argument in
            parentheses, e.g. "damped_integrator(0.25)".
        **params: keyword parameters of the factory (c, n).
    """
    match = _CALL_RE.match(name)
    args: List[float] = []
    if match:
        name = match.group(1)
        if match.group(2):
            try:
                args = [float(a) for a in match.group(2).split(",")]
            except ValueError:
                raise ModelValidationError(f"Cannot read system arguments in '{match.group(0)}'") from None
    factory = _REGISTRY.get(name.strip())
    if factory is None:
        raise UnknownSystemError(name, available_systems())
    if "n" in params:
        n = params["n"]
        if int(n) != n or n < 1:
            raise ModelValidationError(f"System dimension n must be a positive integer, got {n}")
        params["n"] = int(n)
    try:
        return factory(*args, **params)
    except TypeError as e:
        raise ModelValidationError(f"Bad parameters for system '{name}': {e}") from None


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------

def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1 and M.size == 1:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ModelValidationError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ModelValidationError(f"{name} contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M))))
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * scale):
        raise ModelValidationError(f"{name} must be symmetric")
    return 0.5 * (M + M.T)


def quadratic_cost(Qv, Ru, v_ref=None, u_ref=None) -> StageCost:
    """l(v, u) = 1/2 (v - v_ref)' Qv (v - v_ref) + 1/2 (u - u_ref)' Ru (u - u_ref).

    Qv must be symmetric PSD and Ru symmetric PD; scalars are read as 1x1.
    """
    Q = _as_matrix(Qv, "Qv")
    R = _as_matrix(Ru, "Ru")
    q_eigs = np.linalg.eigvalsh(Q)
    r_eigs = np.linalg.eigvalsh(R)
    if q_eigs[0] < -1e-12 * max(1.0, abs(q_eigs[-1])):
        raise ModelValidationError(f"Qv must be positive semidefinite (min eigenvalue {q_eigs[0]:.3e})")
    if r_eigs[0] <= 0.0:
        raise ModelValidationError(f"Ru must be positive definite (min eigenvalue {r_eigs[0]:.3e})")
    n, m = Q.shape[0], R.shape[0]
    vr = np.zeros(n) if v_ref is None else as_vector(v_ref, n, "v_ref")
    ur = np.zeros(m) if u_ref is None else as_vector(u_ref, m, "u_ref")
    zeros_vu = np.zeros((n, m))

    def ell(v, u):
        dv = np.asarray(v, dtype=float) - vr
        du = np.asarray(u, dtype=float) - ur
        return float(0.5 * dv @ Q @ dv + 0.5 * du @ R @ du)

    return StageCost(
        name="quadratic",
        ell=ell,
        grad_v=lambda v, u: Q @ (np.asarray(v, dtype=float) - vr),
        grad_u=lambda v, u: R @ (np.asarray(u, dtype=float) - ur),
        hess_vv=lambda v, u: Q,
        hess_uu=lambda v, u: R,
        hess_vu=lambda v, u: zeros_vu,
        params={"Qv": Q, "Ru": R, "v_ref": vr, "u_ref": ur},
    )


def scaled_cost(cost: StageCost, factor: float) -> StageCost:
    """factor * l, used to check argmin invariance of the steady-state problem."""
    if not factor > 0:
        raise ModelValidationError(f"Cost scale must be positive, got {factor}")
    return StageCost(
        name=f"{factor:g}*{cost.name}",
        ell=lambda v, u: factor * cost.ell(v, u),
        grad_v=lambda v, u: factor * np.asarray(cost.grad_v(v, u)),
        grad_u=lambda v, u: factor * np.asarray(cost.grad_u(v, u)),
        hess_vv=lambda v, u: factor * np.asarray(cost.hess_vv(v, u)),
        hess_uu=lambda v, u: factor * np.asarray(cost.hess_uu(v, u)),
        hess_vu=lambda v, u: factor * np.asarray(cost.hess_vu(v, u)),
        params={**cost.params, "scale": factor},
    )


def is_reference_lq(system: SystemModel, cost: StageCost) -> bool:
    """True for the scalar double integrator with l = 1/2 (v^2 + u^2)."""
    if system.name != "double_integrator" or system.n_q != 1 or cost.name != "quadratic":
        return False
    p = cost.params
    return (
        np.allclose(p["Qv"], 1.0) and np.allclose(p["Ru"], 1.0)
        and not np.any(p["v_ref"]) and not np.any(p["u_ref"])
    )


# ---------------------------------------------------------------------------
# Expression-defined models
# ---------------------------------------------------------------------------

def expr_system(sources: Sequence[str], m: int, name: str = "expr") -> SystemModel:
    """System whose k-th velocity derivative is the expression sources[k]."""
    if not sources:
        raise ModelValidationError("An expression system needs at least one component")
    if m < 1:
        raise ModelValidationError(f"Input dimension m must be >= 1, got {m}")
    n = len(sources)
    exprs = [parse(src, n_v=n, n_u=m) for src in sources]

    def _duals(v, u):
        return [evaluate(e, v, u) for e in exprs]

    def f(v, u):
        return np.array([d.value for d in _duals(v, u)])

    def df_dv(v, u):
        return np.array([d.grad[:n] for d in _duals(v, u)])

    def df_du(v, u):
        return np.array([d.grad[n:] for d in _duals(v, u)])

    def hess_f(v, u, w):
        H = np.zeros((n + m, n + m))
        for wi, e in zip(w, exprs):
            if wi != 0.0:
                H += wi * hessian_fd(e, v, u)
        return H

    return SystemModel(
        name=name, n_q=n, m=m, f=f, df_dv=df_dv, df_du=df_du, hess_f=hess_f,
        params={"sources": [to_source(e) for e in exprs]},
    )


def expr_cost(source: str, n_q: int, m: int) -> StageCost:
    """Stage cost given as one expression in v[i], u[j]."""
    e = parse(source, n_v=n_q, n_u=m)
    n = n_q

    def grad(v, u):
        return evaluate(e, v, u).grad

    return StageCost(
        name="expr",
        ell=lambda v, u: evaluate(e, v, u).value,
        grad_v=lambda v, u: grad(v, u)[:n],
        grad_u=lambda v, u: grad(v, u)[n:],
        hess_vv=lambda v, u: hessian_fd(e, v, u)[:n, :n],
        hess_uu=lambda v, u: hessian_fd(e, v, u)[n:, n:],
        hess_vu=lambda v, u: hessian_fd(e, v, u)[:n, n:],
        params={"source": to_source(e)},
    )


# ---------------------------------------------------------------------------
# Checks and simulation
# ---------------------------------------------------------------------------

def derivative_check(
    system: SystemModel,
    cost: Optional[StageCost] = None,
    samples: int = 100,
    seed: int = 0,
    scale: float = 2.0,
) -> float:
    """Worst relative error of the declared Jacobians/gradients against central differences.

    The error of each column is measured as |analytic - fd| / max(1, |fd|).
    """
    rng = np.random.default_rng(seed)
    n, m = system.n_q, system.m
    worst = 0.0
    for _ in range(samples):
        v = rng.uniform(-scale, scale, n)
        u = rng.uniform(-scale, scale, m)
        fv, fu = system.jacobians(v, u)
        analytic = np.hstack([fv, fu])
        fd = _fd_jacobian(lambda z: np.asarray(system.f(z[:n], z[n:]), dtype=float), np.concatenate([v, u]))
        worst = max(worst, _rel_err(analytic, fd))
        if cost is not None:
            g = np.concatenate([cost.grad_v(v, u), cost.grad_u(v, u)])
            g_fd = _fd_jacobian(lambda z: np.array([cost.ell(z[:n], z[n:])]), np.concatenate([v, u]))[0]
            worst = max(worst, _rel_err(g, g_fd))
            H = cost.hessian(v, u)
            H_fd = _fd_jacobian(
                lambda z: np.concatenate([cost.grad_v(z[:n], z[n:]), cost.grad_u(z[:n], z[n:])]),
                np.concatenate([v, u]),
            )
            worst = max(worst, _rel_err(H, H_fd))
    return worst


def _fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    h0 = np.finfo(float).eps ** (1.0 / 3.0)
    cols = []
    for i in range(x.size):
        h = h0 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((fun(xp) - fun(xm)) / (2.0 * h))
    return np.column_stack(cols)


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def simulate(
    system: SystemModel,
    q0,
    v0,
    t: np.ndarray,
    u_samples: np.ndarray,
    substeps: int = 1,
):
    """Forward RK4 simulation under a piecewise-linear input.

    Args:
        t: strictly increasing sample times.
        u_samples: input at each sample time, shape (len(t), m).
        substeps: RK4 steps per grid interval.

    Returns:
        (q, v) arrays of shape (len(t), n_q).
    """
    n = system.n_q
    t = np.asarray(t, dtype=float).reshape(-1)
    U = np.asarray(u_samples, dtype=float).reshape(t.size, system.m)
    if t.size < 2 or not np.all(np.diff(t) > 0):
        raise ModelValidationError("simulate needs a strictly increasing grid with two or more nodes")

    def u_at(s: float) -> np.ndarray:
        return np.array([np.interp(s, t, U[:, j]) for j in range(system.m)])

    def rhs(s: float, x: np.ndarray) -> np.ndarray:
        v = x[n:]
        return np.concatenate([v, system.f(v, u_at(s))])

    x = np.concatenate([as_vector(q0, n, "q0"), as_vector(v0, n, "v0")])
    X = np.empty((t.size, 2 * n))
    X[0] = x
    for k in range(t.size - 1):
        h = (t[k + 1] - t[k]) / substeps
        s = t[k]
        for _ in range(substeps):
            x = rk4_step(rhs, s, x, h)
            s += h
        X[k + 1] = x
    return X[:, :n], X[:, n:]


def check_bounds(bounds: Optional[BoxBounds], v: np.ndarray, u: np.ndarray, tol: float = 1e-9) -> List[str]:
    """Describe every sample of v or u outside the box; empty when admissible."""
    if bounds is None:
        return []
    V = np.atleast_2d(np.asarray(v, dtype=float))
    U = np.atleast_2d(np.asarray(u, dtype=float))
    violations: List[str] = []
    for label, X, lower, upper in (
        ("v", V, bounds.v_lower, bounds.v_upper),
        ("u", U, bounds.u_lower, bounds.u_upper),
    ):
        if lower is not None:
            excess = np.asarray(lower, dtype=float) - X
            worst = float(np.max(excess))
            if worst > tol:
                node, comp = np.unravel_index(int(np.argmax(excess)), excess.shape)
                violations.append(f"{label}[{comp}] below lower bound by {worst:.3e} at sample {node}")
        if upper is not None:
            excess = X - np.asarray(upper, dtype=float)
            worst = float(np.max(excess))
            if worst > tol:
                node, comp = np.unravel_index(int(np.argmax(excess)), excess.shape)
                violations.append(f"{label}[{comp}] above upper bound by {worst:.3e} at sample {node}")
    if violations:
        logger.warning(f"Box bounds violated: {'; '.join(violations)}")
    return violations


def trapezoid_objective(cost: StageCost, t: np.ndarray, v: np.ndarray, u: np.ndarray) -> float:
    """Trapezoidal integral of l(v, u) on the sample grid."""
    values = np.array([cost.ell(v[k], u[k]) for k in range(len(t))])
    return float(trapezoid(values, t))
