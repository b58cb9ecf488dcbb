# Optimal control and velocity-turnpike analysis for translation-symmetric mechanical systems
from .errors import TurnpikeError
from .model import OcpSpec, SolveMethod, StageCost, SystemModel, Trajectory, Trim, builtin_system, quadratic_cost
from .ocp import solve
from .steady import SteadyStateProblem, solve_velocity_steady_state
from .turnpike import check_dissipativity, theta_measure, turnpike_report

__version__ = "1.0.0"

__all__ = [
    "TurnpikeError",
    "OcpSpec",
    "SolveMethod",
    "StageCost",
    "SystemModel",
    "Trajectory",
    "Trim",
    "builtin_system",
    "quadratic_cost",
    "solve",
    "SteadyStateProblem",
    "solve_velocity_steady_state",
    "check_dissipativity",
    "theta_measure",
    "turnpike_report",
]
