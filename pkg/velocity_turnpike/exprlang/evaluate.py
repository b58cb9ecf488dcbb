"""
Evaluation of parsed expressions with exact first derivatives.

Gradients come from forward-mode dual numbers over the stacked variable
vector (v[0..n-1], u[0..m-1]). Second derivatives are central differences
of that gradient with step eps^(1/3) * (1 + |x_i|).
"""

import logging
from typing import Tuple

import numpy as np

from ..errors import ExprDomainError, ModelValidationError
from .dual import Dual
from .parser import BinOp, Call, Expr, Neg, Num, Var, max_index, to_source

logger = logging.getLogger(__name__)

FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


def _check_dims(e: Expr, n_v: int, n_u: int) -> None:
    if max_index(e, "v") >= n_v or max_index(e, "u") >= n_u:
        raise ModelValidationError(
            f"Expression '{to_source(e)}' indexes beyond v[{n_v - 1}] / u[{n_u - 1}]"
        )


def _eval(e: Expr, env: Tuple[Dual, ...], n_v: int, size: int) -> Dual:
    if isinstance(e, Num):
        return Dual.constant(e.value, size)
    if isinstance(e, Var):
        return env[e.index if e.name == "v" else n_v + e.index]
    if isinstance(e, Neg):
        return -_eval(e.operand, env, n_v, size)
    if isinstance(e, Call):
        arg = _eval(e.arg, env, n_v, size)
        try:
            return getattr(arg, e.func)()
        except OverflowError:
            raise ExprDomainError(f"Overflow in {e.func}", to_source(e)) from None
    if isinstance(e, BinOp):
        left = _eval(e.left, env, n_v, size)
        right = _eval(e.right, env, n_v, size)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if e.op == "/":
            if right.value == 0.0:
                raise ExprDomainError("Division by zero", to_source(e))
            return left / right
        if e.op == "^":
            return _power(e, left, right)
    raise TypeError(f"Not an expression node: {e!r}")


def _power(e: BinOp, base: Dual, exponent: Dual) -> Dual:
    try:
        if not np.any(exponent.grad):
            c = exponent.value
            if base.value == 0.0 and c < 1.0 and c != 0.0:
                raise ExprDomainError("Zero base with exponent below one", to_source(e))
            if base.value < 0.0 and not float(c).is_integer():
                raise ExprDomainError("Negative base with non-integer exponent", to_source(e))
            return base.pow_const(c)
        if base.value <= 0.0:
            raise ExprDomainError("Non-positive base with variable exponent", to_source(e))
        return base.pow_dual(exponent)
    except OverflowError:
        raise ExprDomainError("Overflow in power", to_source(e)) from None


def evaluate(e: Expr, v: np.ndarray, u: np.ndarray) -> Dual:
    """Evaluate e at (v, u) returning a Dual over the stacked (v, u) vector."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n_v, n_u = v.size, u.size
    _check_dims(e, n_v, n_u)
    size = n_v + n_u
    x = np.concatenate([v, u])
    env = tuple(Dual.variable(x[i], i, size) for i in range(size))
    result = _eval(e, env, n_v, size)
    if not np.isfinite(result.value) or not np.all(np.isfinite(result.grad)):
        raise ExprDomainError("Non-finite result", to_source(e))
    return result


def eval_with_gradient(e: Expr, v: np.ndarray, u: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """Return (value, d/dv, d/du) with exact forward-mode partials."""
    n_v = np.atleast_1d(np.asarray(v)).size
    result = evaluate(e, v, u)
    return result.value, result.grad[:n_v].copy(), result.grad[n_v:].copy()


def hessian_fd(e: Expr, v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Symmetrized Hessian over (v, u) by central differences of the gradient."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n_v = v.size
    x = np.concatenate([v, u])
    H = np.empty((x.size, x.size))
    for i in range(x.size):
        h = FD_STEP * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        gp = evaluate(e, xp[:n_v], xp[n_v:]).grad
        gm = evaluate(e, xm[:n_v], xm[n_v:]).grad
        H[:, i] = (gp - gm) / (2.0 * h)
    return 0.5 * (H + H.T)
