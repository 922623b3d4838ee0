"""Request/response schemas of the coordination service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from ..scenario import ScenarioModel, TimeGridModel

__all__ = [
    "GenerateRequest",
    "CentralSolveRequest",
    "CentralSolveResponse",
    "OracleModel",
    "DistributedRunRequest",
    "TraceRowModel",
    "DistributedRunResponse",
    "CentralArtifactModel",
    "CompareRequest",
    "ValleyStatsModel",
    "CompareResponse",
    "DiameterRequest",
    "DiameterResponse",
    "HealthResponse",
]


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    size: int = 100
    seed: int = 0
    grid: TimeGridModel = Field(default_factory=TimeGridModel)
    commute_probability: float = 1.0
    midday_trip_probability: float = 0.3
    b_tilde: float = 1e-3
    a_tilde: float = 0.0
    fleet_share: float = 0.1
    # measured profile in kW per step; omitted -> synthetic shape scaled to
    # the requested fleet share
    inelastic_load_kw: list[float] | None = None


class CentralSolveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: ScenarioModel
    tolerance: float = 1e-6
    method: Literal["interior-point", "projected-gradient"] = "interior-point"


class ResidualModel(BaseModel):
    stationarity_load: float
    stationarity_schedule: float
    load_balance: float
    primal_energy: float
    primal_bounds: float
    dual_negativity: float
    complementarity_energy: float
    complementarity_bounds: float
    max_residual: float


class CentralSolveResponse(BaseModel):
    objective: float
    load: list[float]
    price: list[float]
    schedules: list[list[float]]
    residuals: ResidualModel
    method: str
    pev_ids: list[str]


class OracleModel(BaseModel):
    """The centralized optimum a distributed run is measured against."""

    objective: float
    load: list[float]


class DistributedRunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: ScenarioModel
    iterations: int | None = None
    topology_kind: Literal["path", "ring", "custom"] | None = None
    topology_edges: list[tuple[int, int]] | None = None
    drop_probability: float = 0.0
    fault_seed: int | None = None
    mode: Literal["parallel", "serial"] | None = None
    tol_consensus: float | None = None
    tol_kkt: float | None = None
    include_trace: bool = True
    oracle: OracleModel | None = None


class TraceRowModel(BaseModel):
    iteration: int
    rel_obj: float | None = None
    rel_load: float | None = None
    consensus_disagreement: float
    max_kkt_residual: float


class DistributedRunResponse(BaseModel):
    iterations: int
    stop_reason: str
    objective: float
    final_load: list[float]
    schedules: list[list[float]]
    pev_ids: list[str]
    trace: list[TraceRowModel]
    final: TraceRowModel
    assembled_residuals: ResidualModel


class CentralArtifactModel(BaseModel):
    """Just enough of a central solution to compare against."""

    objective: float
    load: list[float]
    schedules: list[list[float]]


class CompareRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: ScenarioModel
    schedules: list[list[float]]
    central: CentralArtifactModel
    trace: list[TraceRowModel] | None = None


class ValleyStatsModel(BaseModel):
    inelastic_variance: float
    combined_variance: float
    inelastic_peak_kw: float
    combined_peak_kw: float
    valley_energy_fraction: float


class CompareResponse(BaseModel):
    rel_obj: float
    rel_load: float
    valley_central: ValleyStatsModel
    valley_distributed: ValleyStatsModel
    series: list[TraceRowModel]


class DiameterRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    num_agents: int
    kind: Literal["path", "ring", "custom"] = "path"
    edges: list[tuple[int, int]] | None = None


class DiameterResponse(BaseModel):
    num_agents: int
    num_edges: int
    diameter: int
    min_degree: int
    max_degree: int
