# Trims and the optimal velocity steady-state problem
from .trims import (
    SteadyStateProblem,
    default_guesses,
    find_trim,
    kkt_residual,
    multi_start,
    reduced_hessian_eigenvalues,
    solve_velocity_steady_state,
    trim_trajectory,
)

__all__ = [
    "SteadyStateProblem",
    "default_guesses",
    "find_trim",
    "kkt_residual",
    "multi_start",
    "reduced_hessian_eigenvalues",
    "solve_velocity_steady_state",
    "trim_trajectory",
]
