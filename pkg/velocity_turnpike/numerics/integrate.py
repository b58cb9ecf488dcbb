"""
Fixed-step classical Runge-Kutta integration.
"""

import logging
from typing import Callable, Tuple

import numpy as np

from ..errors import IntegrationError, ModelValidationError

logger = logging.getLogger(__name__)

Rhs = Callable[[float, np.ndarray], np.ndarray]


def _checked(rhs: Rhs, t: float, x: np.ndarray) -> np.ndarray:
    dx = np.asarray(rhs(t, x), dtype=float)
    if not np.all(np.isfinite(dx)):
        raise IntegrationError("Right-hand side returned a non-finite value", t)
    return dx


def rk4_step(rhs: Rhs, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = _checked(rhs, t, x)
    k2 = _checked(rhs, t + 0.5 * h, x + 0.5 * h * k1)
    k3 = _checked(rhs, t + 0.5 * h, x + 0.5 * h * k2)
    k4 = _checked(rhs, t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(
    rhs: Rhs, x0: np.ndarray, t0: float, t1: float, steps: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate x' = rhs(t, x) on [t0, t1] with `steps` uniform RK4 steps.

    Returns:
        (t, X) with t of shape (steps+1,) and X of shape (steps+1, dim).
    """
    if steps < 1:
        raise ModelValidationError(f"rk4_integrate needs steps >= 1, got {steps}")
    if not t1 > t0:
        raise ModelValidationError(f"rk4_integrate needs t1 > t0, got [{t0}, {t1}]")

    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    t = np.linspace(t0, t1, steps + 1)
    h = (t1 - t0) / steps
    X = np.empty((steps + 1, x.size))
    X[0] = x
    for k in range(steps):
        x = rk4_step(rhs, t[k], x, h)
        X[k + 1] = x
    return t, X
