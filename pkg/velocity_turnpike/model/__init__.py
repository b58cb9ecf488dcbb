# Domain types and the built-in system registry
from .models import (
    BoxBounds,
    OcpSpec,
    SolveMethod,
    StageCost,
    SystemModel,
    Trajectory,
    Trim,
    as_vector,
    trim_tolerance,
)
from .systems import (
    available_systems,
    builtin_system,
    check_bounds,
    damped_integrator,
    derivative_check,
    double_integrator,
    expr_cost,
    expr_system,
    is_reference_lq,
    quadratic_cost,
    scaled_cost,
    simulate,
    trapezoid_objective,
)

__all__ = [
    "BoxBounds",
    "OcpSpec",
    "SolveMethod",
    "StageCost",
    "SystemModel",
    "Trajectory",
    "Trim",
    "as_vector",
    "trim_tolerance",
    "available_systems",
    "builtin_system",
    "check_bounds",
    "damped_integrator",
    "derivative_check",
    "double_integrator",
    "expr_cost",
    "expr_system",
    "is_reference_lq",
    "quadratic_cost",
    "scaled_cost",
    "simulate",
    "trapezoid_objective",
]
