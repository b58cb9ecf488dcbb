# Scenario files, CSV output and subcommands
from .scenario import Scenario, ScenarioFile, load_scenario, parse_scenario
from .csv_io import (
    read_table,
    read_trajectory_csv,
    trajectory_columns,
    write_table,
    write_trajectory_csv,
)
from .commands import (
    cmd_solve,
    cmd_steady,
    cmd_sweep,
    cmd_turnpike,
    resolve_method,
    solve_horizons,
    steady_trim,
)

__all__ = [
    "Scenario",
    "ScenarioFile",
    "load_scenario",
    "parse_scenario",
    "read_table",
    "read_trajectory_csv",
    "trajectory_columns",
    "write_table",
    "write_trajectory_csv",
    "cmd_solve",
    "cmd_steady",
    "cmd_sweep",
    "cmd_turnpike",
    "resolve_method",
    "solve_horizons",
    "steady_trim",
]
