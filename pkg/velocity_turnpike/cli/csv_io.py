"""
Trajectory and table CSV files.

Trajectory files have one column group per signal, t, q_0.., v_0.., u_0..,
lambda_q_0.., lambda_v_0.., at 17 significant digits so cross-solver diffs
are exact at double precision. Missing adjoints are written as nan.
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Sequence, TextIO, Union

import numpy as np

from ..errors import ModelValidationError
from ..model import Trajectory

logger = logging.getLogger(__name__)

FMT = "%.17g"
SIGNALS = ("q", "v", "u", "lambda_q", "lambda_v")

_COLUMN_RE = re.compile(r"^(q|v|u|lambda_q|lambda_v)_(\d+)$")

Target = Union[str, Path, TextIO]


def trajectory_columns(n_q: int, m: int) -> List[str]:
    cols = ["t"]
    for sig in SIGNALS:
        size = m if sig == "u" else n_q
        cols.extend(f"{sig}_{i}" for i in range(size))
    return cols


def trajectory_table(traj: Trajectory) -> np.ndarray:
    nodes, n = traj.q.shape
    lam_q = traj.lambda_q if traj.has_adjoints else np.full((nodes, n), np.nan)
    lam_v = traj.lambda_v if traj.has_adjoints else np.full((nodes, n), np.nan)
    return np.column_stack([traj.t, traj.q, traj.v, traj.u, lam_q, lam_v])


def write_table(target: Target, columns: Sequence[str], rows: np.ndarray) -> None:
    np.savetxt(target, np.atleast_2d(rows), delimiter=",", header=",".join(columns), comments="", fmt=FMT)


def write_trajectory_csv(traj: Trajectory, target: Target) -> None:
    write_table(target, trajectory_columns(traj.q.shape[1], traj.u.shape[1]), trajectory_table(traj))
    if isinstance(target, (str, Path)):
        logger.info(f"Wrote {traj.t.size} nodes ({traj.method}) to {target}")


def read_table(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise ModelValidationError(f"{path}: header has {len(header)} columns, rows have {data.shape[1]}")
    return {name: data[:, i] for i, name in enumerate(header)}


def read_trajectory_csv(path: Union[str, Path]) -> Trajectory:
    """Re-ingest a trajectory CSV; all-nan adjoint columns come back as no adjoints."""
    table = read_table(path)
    if "t" not in table:
        raise ModelValidationError(f"{path}: missing column 't'")
    groups: Dict[str, List[np.ndarray]] = {sig: [] for sig in SIGNALS}
    for name, column in table.items():
        match = _COLUMN_RE.match(name)
        if match:
            sig, index = match.group(1), int(match.group(2))
            if index != len(groups[sig]):
                raise ModelValidationError(f"{path}: column '{name}' out of order")
            groups[sig].append(column)
    for sig in ("q", "v", "u"):
        if not groups[sig]:
            raise ModelValidationError(f"{path}: no '{sig}_*' columns")
    arrays = {sig: np.column_stack(cols) if cols else None for sig, cols in groups.items()}
    if arrays["lambda_q"] is None or np.all(np.isnan(arrays["lambda_q"])):
        arrays["lambda_q"] = arrays["lambda_v"] = None
    return Trajectory(
        t=table["t"],
        q=arrays["q"],
        v=arrays["v"],
        u=arrays["u"],
        lambda_q=arrays["lambda_q"],
        lambda_v=arrays["lambda_v"],
        method="csv",
    )
