# Closed-form oracle for the scalar double integrator
from .closed_form import (
    T_MIN,
    AnalyticScenario,
    VelocityDecomposition,
    adjoint_initial_values,
    analytic_trajectory,
    combined_term_bound,
    denominator,
    evaluate_closed_form,
    exp_At,
    nu_remark,
    solve_analytic,
    state_adjoint_matrix,
    velocity_decomposition,
)

__all__ = [
    "T_MIN",
    "AnalyticScenario",
    "VelocityDecomposition",
    "adjoint_initial_values",
    "analytic_trajectory",
    "combined_term_bound",
    "denominator",
    "evaluate_closed_form",
    "exp_At",
    "nu_remark",
    "solve_analytic",
    "state_adjoint_matrix",
    "velocity_decomposition",
]
