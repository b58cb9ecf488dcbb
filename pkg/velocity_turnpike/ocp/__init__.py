# Direct and indirect OCP solvers
from .collocation import CollocationLayout, CollocationProblem, solve_direct
from .shooting import ShootingProblem, solve_indirect
from .residuals import PmpResidualReport, pmp_residuals, time_derivative
from .dispatch import default_method, solve

__all__ = [
    "CollocationLayout",
    "CollocationProblem",
    "solve_direct",
    "ShootingProblem",
    "solve_indirect",
    "PmpResidualReport",
    "pmp_residuals",
    "time_derivative",
    "default_method",
    "solve",
]
