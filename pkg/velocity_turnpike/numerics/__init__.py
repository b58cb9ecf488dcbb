# Linear algebra, ODE integration and root finding used by the solvers
from .linalg import BandedMatrix, lu_solve, solve_linear
from .integrate import rk4_integrate, rk4_step
from .newton import NewtonConfig, NewtonResult, newton_solve

__all__ = [
    "BandedMatrix",
    "lu_solve",
    "solve_linear",
    "rk4_integrate",
    "rk4_step",
    "NewtonConfig",
    "NewtonResult",
    "newton_solve",
]
