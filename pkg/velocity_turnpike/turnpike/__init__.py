# Turnpike measurements, dissipativity checks and adjoint intervals
from .measures import (
    DELTA_EXACT,
    HyperbolicRow,
    TurnpikeReport,
    deviation,
    interior_max,
    measure_above,
    theta_measure,
    turnpike_report,
)
from .dissipativity import (
    BoundCheck,
    BoundTable,
    DissipativityReport,
    Storage,
    StorageKind,
    Violation,
    check_dissipativity,
    prop1_bound,
)
from .adjoint import AdjointIntervalReport, adjoint_intervals

__all__ = [
    "DELTA_EXACT",
    "HyperbolicRow",
    "TurnpikeReport",
    "deviation",
    "interior_max",
    "measure_above",
    "theta_measure",
    "turnpike_report",
    "BoundCheck",
    "BoundTable",
    "DissipativityReport",
    "Storage",
    "StorageKind",
    "Violation",
    "check_dissipativity",
    "prop1_bound",
    "AdjointIntervalReport",
    "adjoint_intervals",
]
