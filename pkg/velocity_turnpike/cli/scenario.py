"""
Scenario files: JSON documents validated against a strict pydantic schema.

Unknown keys are rejected, and every validation failure is reported as a
ScenarioError carrying the dotted path of the offending key (e.g. "ocp.T" or
"ocp.T_sweep.2").
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import VALIDATION_ERRORS, ScenarioError
from ..model import (
    BoxBounds,
    OcpSpec,
    SolveMethod,
    StageCost,
    SystemModel,
    builtin_system,
    expr_cost,
    expr_system,
    quadratic_cost,
)
from ..numerics import NewtonConfig
from ..steady import SteadyStateProblem
from ..turnpike import DELTA_EXACT, Storage, StorageKind

logger = logging.getLogger(__name__)

Vector = Union[float, List[float]]
Matrix = Union[float, List[float], List[List[float]]]
PositiveFloat = Annotated[float, Field(gt=0)]
NonNegativeFloat = Annotated[float, Field(ge=0)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

class SystemSection(_Section):
    """Built-in system by name, or one expression per velocity component."""

    builtin: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    expr: Optional[List[str]] = None
    m: int = Field(1, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _from_name(cls, data):
        if isinstance(data, str):
            return {"builtin": data}
        return data

    @model_validator(mode="after")
    def _one_source(self):
        if (self.builtin is None) == (self.expr is None):
            raise ValueError("give exactly one of 'builtin' or 'expr'")
        if self.expr is not None and not self.expr:
            raise ValueError("'expr' needs at least one component")
        return self


class CostSection(_Section):
    """Quadratic cost (Qv, Ru with optional references) or an expression."""

    Qv: Optional[Matrix] = None
    Ru: Optional[Matrix] = None
    v_ref: Optional[Vector] = None
    u_ref: Optional[Vector] = None
    expr: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _from_string(cls, data):
        if isinstance(data, str):
            return {} if data == "quadratic" else {"expr": data}
        return data

    @model_validator(mode="after")
    def _one_form(self):
        quadratic = any(x is not None for x in (self.Qv, self.Ru, self.v_ref, self.u_ref))
        if quadratic and self.expr is not None:
            raise ValueError("'expr' cannot be combined with quadratic weights")
        return self


class OcpSection(_Section):
    T: Optional[PositiveFloat] = None
    T_sweep: Optional[List[PositiveFloat]] = None
    q0: Vector = 0.0
    v0: Vector = 0.0
    qT: Vector = 0.0
    vT: Vector = 0.0
    N: int = Field(1000, ge=2)

    @field_validator("T_sweep")
    @classmethod
    def _non_empty(cls, value):
        if value is not None and not value:
            raise ValueError("T_sweep must list at least one horizon")
        return value


class BoundsSection(_Section):
    v_lower: Optional[Vector] = None
    v_upper: Optional[Vector] = None
    u_lower: Optional[Vector] = None
    u_upper: Optional[Vector] = None


class TurnpikeSection(_Section):
    eps_grid: List[NonNegativeFloat] = Field(default_factory=lambda: [0.1, 0.25, 0.5, 1.0], min_length=1)
    nu_bar: NonNegativeFloat = 3.0
    delta_exact: PositiveFloat = DELTA_EXACT
    adjoint_tol_const: NonNegativeFloat = 1e-6
    adjoint_tol_zero: NonNegativeFloat = 1e-8


class QuadraticStorageSection(_Section):
    P: Matrix
    q_ref: Optional[Vector] = None
    v_ref: Optional[Vector] = None


class DissipativitySection(_Section):
    storage: Union[Literal["zero"], QuadraticStorageSection] = "zero"
    alpha_a: Union[Literal["fit"], PositiveFloat] = "fit"
    # reachability of the trim from the boundary data is taken on trust
    reachability_asserted: bool = False


class SolverSection(_Section):
    method: Optional[SolveMethod] = None
    tol_residual: Optional[PositiveFloat] = None
    max_iter: Optional[int] = Field(None, ge=1)
    backtrack: Optional[float] = Field(None, gt=0, lt=1)
    armijo: Optional[float] = Field(None, gt=0, lt=0.5)
    min_step: Optional[PositiveFloat] = None
    segments: Optional[int] = Field(None, ge=1)
    kkt_solver: Optional[Literal["banded", "dense"]] = None


class SteadySection(_Section):
    v_guess: Optional[Vector] = None
    u_guess: Optional[Vector] = None
    lambda_guess: Optional[Vector] = None
    spread: PositiveFloat = 10.0
    starts: int = Field(9, ge=1)


class ScenarioFile(_Section):
    name: str = "scenario"
    description: Optional[str] = None
    system: SystemSection
    cost: CostSection = Field(default_factory=CostSection)
    ocp: OcpSection
    bounds: Optional[BoundsSection] = None
    turnpike: Optional[TurnpikeSection] = None
    dissipativity: Optional[DissipativitySection] = None
    solver: SolverSection = Field(default_factory=SolverSection)
    steady: SteadySection = Field(default_factory=SteadySection)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

_UNION_TAGS = ("str", "int", "float", "bool", "list", "dict")


def _dotted(loc) -> str:
    # pydantic inserts union branch tags into loc; keep data keys and indices
    parts = [str(p) for p in loc if not (isinstance(p, str) and ("[" in p or p in _UNION_TAGS))]
    return ".".join(parts) or "<root>"


def parse_scenario(data: dict) -> "Scenario":
    """Validate an already-decoded scenario document."""
    try:
        raw = ScenarioFile.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ScenarioError(_dotted(first["loc"]), first["msg"]) from None
    if raw.ocp.T is None and raw.ocp.T_sweep is None:
        raise ScenarioError("ocp.T", "Field required")
    return Scenario(raw)


def load_scenario(path: Union[str, Path]) -> "Scenario":
    """Read and validate a scenario file. OSError propagates unchanged."""
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("<root>", f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    scenario = parse_scenario(data)
    logger.info(f"Loaded scenario '{scenario.raw.name}' from {path}")
    return scenario


# ---------------------------------------------------------------------------
# Building domain objects
# ---------------------------------------------------------------------------

def _vec(x: Vector, n: int) -> np.ndarray:
    """Scalars broadcast to every component."""
    if isinstance(x, (int, float)):
        return np.full(n, float(x))
    return np.asarray(x, dtype=float)


@dataclass
class Scenario:
    """Validated scenario plus builders for the domain objects it describes."""

    raw: ScenarioFile

    def __post_init__(self):
        self._system: Optional[SystemModel] = None
        self._cost: Optional[StageCost] = None

    @property
    def system(self) -> SystemModel:
        if self._system is None:
            sec = self.raw.system
            try:
                if sec.builtin is not None:
                    self._system = builtin_system(sec.builtin, **sec.params)
                else:
                    self._system = expr_system(sec.expr, sec.m, name=self.raw.name)
            except VALIDATION_ERRORS as e:
                raise ScenarioError("system", str(e)) from e
        return self._system

    @property
    def cost(self) -> StageCost:
        if self._cost is None:
            sec = self.raw.cost
            n, m = self.system.n_q, self.system.m
            try:
                if sec.expr is not None:
                    self._cost = expr_cost(sec.expr, n, m)
                else:
                    Qv = np.eye(n) if sec.Qv is None else sec.Qv
                    Ru = np.eye(m) if sec.Ru is None else sec.Ru
                    self._cost = quadratic_cost(Qv, Ru, sec.v_ref, sec.u_ref)
            except VALIDATION_ERRORS as e:
                raise ScenarioError("cost", str(e)) from e
        return self._cost

    @property
    def horizons(self) -> List[float]:
        ocp = self.raw.ocp
        if ocp.T_sweep is not None:
            return [float(T) for T in ocp.T_sweep]
        if ocp.T is None:
            raise ScenarioError("ocp.T", "Field required")
        return [float(ocp.T)]

    @property
    def bounds(self) -> Optional[BoxBounds]:
        b = self.raw.bounds
        if b is None:
            return None
        return BoxBounds(*(None if x is None else np.atleast_1d(np.asarray(x, dtype=float))
                           for x in (b.v_lower, b.v_upper, b.u_lower, b.u_upper)))

    def ocp_spec(self, T: Optional[float] = None) -> OcpSpec:
        ocp = self.raw.ocp
        if T is None:
            if ocp.T is None:
                raise ScenarioError("ocp.T", "Field required")
            T = ocp.T
        n = self.system.n_q
        try:
            return OcpSpec(
                system=self.system,
                cost=self.cost,
                T=float(T),
                q0=_vec(ocp.q0, n),
                v0=_vec(ocp.v0, n),
                qT=_vec(ocp.qT, n),
                vT=_vec(ocp.vT, n),
                N=ocp.N,
                bounds=self.bounds,
            )
        except VALIDATION_ERRORS as e:
            raise ScenarioError("ocp", str(e)) from e

    def newton_config(self) -> NewtonConfig:
        fields = self.raw.solver.model_dump(include=set(NewtonConfig.model_fields), exclude_none=True)
        return NewtonConfig(**fields)

    def steady_problem(self) -> SteadyStateProblem:
        s = self.raw.steady
        try:
            return SteadyStateProblem(
                self.system, self.cost, s.v_guess, s.u_guess, s.lambda_guess, bounds=self.bounds,
            )
        except VALIDATION_ERRORS as e:
            raise ScenarioError("steady", str(e)) from e

    def storage(self) -> Storage:
        sec = self.raw.dissipativity
        if sec is None or sec.storage == "zero":
            return Storage()
        try:
            return Storage(StorageKind.QUADRATIC, P=sec.storage.P, q_ref=sec.storage.q_ref, v_ref=sec.storage.v_ref)
        except VALIDATION_ERRORS as e:
            raise ScenarioError("dissipativity.storage.P", str(e)) from e
