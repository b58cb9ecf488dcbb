"""
Method dispatch shared by the CLI and sweeps.
"""

import logging
from typing import Optional, Union

from ..analytic import solve_analytic
from ..model import OcpSpec, SolveMethod, Trajectory, is_reference_lq
from ..numerics import NewtonConfig
from .collocation import solve_direct
from .shooting import solve_indirect

logger = logging.getLogger(__name__)


def default_method(spec: OcpSpec) -> SolveMethod:
    """Closed form for the reference double-integrator problem, collocation otherwise."""
    return SolveMethod.ANALYTIC if is_reference_lq(spec.system, spec.cost) else SolveMethod.DIRECT


def solve(
    spec: OcpSpec,
    method: Optional[Union[str, SolveMethod]] = None,
    cfg: Optional[NewtonConfig] = None,
    segments: Optional[int] = None,
    kkt_solver: Optional[str] = None,
) -> Trajectory:
    method = SolveMethod(method) if method is not None else default_method(spec)
    if method == SolveMethod.ANALYTIC:
        return solve_analytic(spec)
    if method == SolveMethod.INDIRECT:
        return solve_indirect(spec, cfg, segments=segments)
    return solve_direct(spec, cfg, kkt_solver=kkt_solver)
