"""Scenario files: the single JSON schema shared by disk, API, and CLI.

A scenario bundles the grid, the fleet, the cost inputs, the communication
topology, and the solver settings. Pydantic models define the wire/file
format; ``compile_*`` helpers turn a model into the core numeric objects.
The inelastic-load scaling mode is resolved at compile time so the solvers
always see fixed cost coefficients.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .cost import CostModel, derive_cost_coefficients, scale_for_fleet_share
from .distributed import SolverConfig, TuningSchedule
from .fleet import FleetGenParams, PevSpec, TimeGrid, generate_synthetic_fleet
from .network import Topology, build_topology
from .problem import ChargingProblem

__all__ = [
    "ScenarioError",
    "TimeGridModel",
    "PevSpecModel",
    "CostInputsModel",
    "TopologyModel",
    "TuningModel",
    "SolverSettingsModel",
    "ScenarioModel",
    "load_scenario",
    "save_scenario",
    "scenario_to_json",
    "compile_problem",
    "compile_topology",
    "compile_config",
    "generate_scenario",
    "synthetic_inelastic_shape",
    "read_inelastic_csv",
    "read_edge_list",
]

# Calibrated on the bundled ~100-vehicle day-ahead scenarios; other scales
# should carry explicit tuning in the scenario file.
DEFAULT_TUNING = dict(alpha0=0.01, beta0=0.45, gamma=6e-4, delta=0.2)


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario content."""


class TimeGridModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    num_steps: int = 96
    step_hours: float = 0.25


class PevSpecModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    id: str
    capacity_kwh: float
    soc_min: float = 0.2
    efficiency: float = 0.9
    max_power_kw: float = 11.0
    initial_energy_kwh: float
    connection: list[int]
    consumption_kwh: list[float]

    def to_spec(self) -> PevSpec:
        return PevSpec(
            id=self.id,
            capacity_kwh=self.capacity_kwh,
            soc_min=self.soc_min,
            efficiency=self.efficiency,
            max_power_kw=self.max_power_kw,
            initial_energy_kwh=self.initial_energy_kwh,
            connection=np.asarray(self.connection),
            consumption_kwh=np.asarray(self.consumption_kwh),
        )

    @classmethod
    def from_spec(cls, spec: PevSpec) -> "PevSpecModel":
        return cls(
            id=spec.id,
            capacity_kwh=float(spec.capacity_kwh),
            soc_min=float(spec.soc_min),
            efficiency=float(spec.efficiency),
            max_power_kw=float(spec.max_power_kw),
            initial_energy_kwh=float(spec.initial_energy_kwh),
            connection=[int(c) for c in spec.connection],
            consumption_kwh=[float(e) for e in spec.consumption_kwh],
        )


class CostInputsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    a_tilde: float = 0.0
    b_tilde: float = 1e-3
    inelastic_load_kw: list[float]
    scaling: Literal["none", "fleet-share"] = "none"
    fleet_share: float = 0.1


class TopologyModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["path", "ring", "custom"] = "path"
    edges: list[tuple[int, int]] | None = None


class TuningModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    alpha0: float
    beta0: float
    gamma: float
    delta: float
    tau_alpha: float = 0.6
    tau_beta: float = 0.51

    def to_schedule(self) -> TuningSchedule:
        return TuningSchedule(
            alpha0=self.alpha0, beta0=self.beta0, gamma=self.gamma,
            delta=self.delta, tau_alpha=self.tau_alpha, tau_beta=self.tau_beta,
        )


class SolverSettingsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    max_iterations: int = 10000
    tol_consensus: float = 1e-9
    tol_kkt: float = 1e-9
    mode: Literal["parallel", "serial"] = "parallel"
    tuning: TuningModel | None = None


class ScenarioModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    grid: TimeGridModel = Field(default_factory=TimeGridModel)
    fleet: list[PevSpecModel]
    cost: CostInputsModel
    topology: TopologyModel = Field(default_factory=TopologyModel)
    solver: SolverSettingsModel = Field(default_factory=SolverSettingsModel)
    seed: int = 0


def _check_consistency(model: ScenarioModel) -> None:
    n_steps = model.grid.num_steps
    if not model.fleet:
        raise ScenarioError("fleet must contain at least one vehicle")
    for pev in model.fleet:
        for name, vec in (("connection", pev.connection), ("consumption_kwh", pev.consumption_kwh)):
            if len(vec) != n_steps:
                raise ScenarioError(
                    f"{pev.id}: {name} has length {len(vec)}, grid expects {n_steps}"
                )
    if len(model.cost.inelastic_load_kw) != n_steps:
        raise ScenarioError(
            f"inelastic_load_kw has length {len(model.cost.inelastic_load_kw)}, "
            f"grid expects {n_steps}"
        )
    ids = [p.id for p in model.fleet]
    if len(set(ids)) != len(ids):
        raise ScenarioError("fleet ids must be unique")


def load_scenario(path) -> ScenarioModel:
    """Parse and validate a scenario file, naming the offending field on failure."""
    raw = Path(path).read_text()
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        model = ScenarioModel.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise ScenarioError(f"{path}: field {loc}: {first['msg']}") from exc
    _check_consistency(model)
    return model


def scenario_to_json(model: ScenarioModel) -> str:
    """Canonical serialization: sorted keys, stable float repr, trailing newline."""
    return json.dumps(model.model_dump(), indent=2, sort_keys=True) + "\n"


def save_scenario(model: ScenarioModel, path) -> None:
    Path(path).write_text(scenario_to_json(model))


def compile_cost(model: ScenarioModel) -> CostModel:
    inelastic = np.asarray(model.cost.inelastic_load_kw, dtype=np.float64)
    if model.cost.scaling == "fleet-share":
        fleet_energy = sum(
            sum(p.consumption_kwh) / p.efficiency for p in model.fleet
        )
        if fleet_energy <= 0:
            raise ScenarioError(
                "fleet-share scaling needs a fleet with nonzero consumption"
            )
        factor = scale_for_fleet_share(
            inelastic, fleet_energy, model.grid.step_hours, model.cost.fleet_share
        )
        inelastic = inelastic * factor
    return derive_cost_coefficients(model.cost.a_tilde, model.cost.b_tilde, inelastic)


def compile_problem(model: ScenarioModel) -> ChargingProblem:
    _check_consistency(model)
    grid = TimeGrid(model.grid.num_steps, model.grid.step_hours)
    specs = [p.to_spec() for p in model.fleet]
    try:
        return ChargingProblem.build(specs, grid, compile_cost(model))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def compile_topology(model: ScenarioModel, override_kind: str | None = None,
                     override_edges=None) -> Topology:
    kind = override_kind or model.topology.kind
    edges = override_edges if override_edges is not None else model.topology.edges
    try:
        return build_topology(kind, len(model.fleet), edges)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def compile_config(model: ScenarioModel) -> SolverConfig:
    settings = model.solver
    tuning = settings.tuning.to_schedule() if settings.tuning else TuningSchedule(**DEFAULT_TUNING)
    return SolverConfig(
        max_iterations=settings.max_iterations,
        schedule=tuning,
        tol_consensus=settings.tol_consensus,
        tol_kkt=settings.tol_kkt,
        mode=settings.mode,
    )


def synthetic_inelastic_shape(grid: TimeGridModel | TimeGrid) -> np.ndarray:
    """Relative winter-city daily profile: overnight trough, evening peak."""
    num_steps = grid.num_steps
    step_hours = grid.step_hours
    hours = (np.arange(num_steps) + 0.5) * step_hours
    return (
        0.55
        + 0.18 * np.exp(-(((hours - 11.0) / 3.2) ** 2))
        + 0.45 * np.exp(-(((hours - 18.7) / 2.2) ** 2))
    )


def generate_scenario(
    size: int,
    seed: int,
    grid: TimeGridModel | None = None,
    gen_params: FleetGenParams | None = None,
    b_tilde: float = 1e-3,
    a_tilde: float = 0.0,
    fleet_share: float = 0.1,
    inelastic_load_kw: list[float] | None = None,
) -> ScenarioModel:
    """Create a full scenario with a synthetic fleet, deterministic per seed.

    Without an explicit profile, a synthetic daily shape is embedded and
    marked for fleet-share scaling, so the fleet ends up at the requested
    share of total demand once compiled.
    """
    grid = grid or TimeGridModel()
    core_grid = TimeGrid(grid.num_steps, grid.step_hours)
    if gen_params is None:
        gen_params = FleetGenParams(size=size)
    elif gen_params.size != size:
        raise ScenarioError(
            f"size {size} disagrees with generator params size {gen_params.size}"
        )
    fleet = generate_synthetic_fleet(gen_params, seed=seed, grid=core_grid)
    if inelastic_load_kw is None:
        profile = [round(float(x), 9) for x in synthetic_inelastic_shape(grid)]
        scaling = "fleet-share"
    else:
        profile = [float(x) for x in inelastic_load_kw]
        scaling = "none"
    return ScenarioModel(
        grid=grid,
        fleet=[PevSpecModel.from_spec(s) for s in fleet],
        cost=CostInputsModel(
            a_tilde=a_tilde,
            b_tilde=b_tilde,
            inelastic_load_kw=profile,
            scaling=scaling,
            fleet_share=fleet_share,
        ),
        topology=TopologyModel(kind="path"),
        solver=SolverSettingsModel(tuning=TuningModel(**DEFAULT_TUNING)),
        seed=seed,
    )


def read_inelastic_csv(path) -> list[float]:
    """Profile file: one 'time_index,load_kw' row per step, with header."""
    import csv

    values: list[float] = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(reader.fieldnames) != {"time_index", "load_kw"}:
            raise ScenarioError(
                f"{path}: expected columns time_index,load_kw, got {reader.fieldnames}"
            )
        rows = sorted((int(r["time_index"]), float(r["load_kw"])) for r in reader)
    for expect, (idx, load) in enumerate(rows):
        if idx != expect:
            raise ScenarioError(f"{path}: missing or duplicate time_index {expect}")
        values.append(load)
    return values


def read_edge_list(path) -> list[tuple[int, int]]:
    """Edge-list file: one '0-indexed u v' pair per line; blank lines ignored."""
    edges: list[tuple[int, int]] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ScenarioError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return edges
