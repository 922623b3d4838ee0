"""FastAPI application wrapping the coordination package.

The service is stateless: every request carries the full scenario content
and responses return complete artifacts. File handling stays client-side.
"""

from __future__ import annotations

import dataclasses
from types import SimpleNamespace

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..central import (
    InfeasibleError,
    SolverError,
    assemble_candidate,
    kkt_residual,
    solve_centralized,
)
from ..cost import evaluate_objective
from ..distributed import SolverConfig, run
from ..fleet import FleetGenParams, FleetGenerationError, validate_feasibility
from ..metrics import ConvergenceSample, rel_load, rel_obj, valley_filling_stats
from ..network import LinkFaultModel, build_topology, graph_diameter
from ..scenario import (
    ScenarioError,
    ScenarioModel,
    compile_config,
    compile_problem,
    compile_topology,
    generate_scenario,
)
from . import models as m

app = FastAPI(title="evcoord", version=__version__)


@app.exception_handler(ScenarioError)
@app.exception_handler(FleetGenerationError)
@app.exception_handler(InfeasibleError)
@app.exception_handler(SolverError)
@app.exception_handler(ValueError)
async def _domain_error(request: Request, exc: Exception) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc)})


def _trace_row(sample: ConvergenceSample) -> m.TraceRowModel:
    return m.TraceRowModel(
        iteration=sample.iteration,
        rel_obj=sample.rel_obj,
        rel_load=sample.rel_load,
        consensus_disagreement=sample.consensus_disagreement,
        max_kkt_residual=sample.max_kkt_residual,
    )


@app.get("/health", response_model=m.HealthResponse)
async def health() -> m.HealthResponse:
    return m.HealthResponse(status="ok", version=__version__)


@app.post("/scenarios/generate", response_model=ScenarioModel)
async def scenarios_generate(req: m.GenerateRequest) -> ScenarioModel:
    params = FleetGenParams(
        size=req.size,
        commute_probability=req.commute_probability,
        midday_trip_probability=req.midday_trip_probability,
    )
    return generate_scenario(
        size=req.size,
        seed=req.seed,
        grid=req.grid,
        gen_params=params,
        b_tilde=req.b_tilde,
        a_tilde=req.a_tilde,
        fleet_share=req.fleet_share,
        inelastic_load_kw=req.inelastic_load_kw,
    )


@app.post("/solve/central", response_model=m.CentralSolveResponse)
async def solve_central(req: m.CentralSolveRequest) -> m.CentralSolveResponse:
    problem = compile_problem(req.scenario)
    solution = solve_centralized(problem, tol=req.tolerance, method=req.method)
    return m.CentralSolveResponse(
        objective=solution.objective,
        load=solution.load.tolist(),
        price=solution.price.tolist(),
        schedules=solution.schedules.tolist(),
        residuals=m.ResidualModel(**solution.residuals.as_dict()),
        method=solution.method,
        pev_ids=[p.id for p in req.scenario.fleet],
    )


@app.post("/runs/distributed", response_model=m.DistributedRunResponse)
async def runs_distributed(req: m.DistributedRunRequest) -> m.DistributedRunResponse:
    problem = compile_problem(req.scenario)
    feasibility = validate_feasibility(list(problem.specs), problem.grid)
    if not feasibility.all_feasible:
        raise InfeasibleError(
            f"infeasible vehicles: {', '.join(feasibility.infeasible_ids())}"
        )
    topology = compile_topology(req.scenario, req.topology_kind, req.topology_edges)
    base = compile_config(req.scenario)
    config = SolverConfig(
        max_iterations=req.iterations or base.max_iterations,
        schedule=base.schedule,
        tol_consensus=req.tol_consensus or base.tol_consensus,
        tol_kkt=req.tol_kkt or base.tol_kkt,
        mode=req.mode or base.mode,
    )
    fault = None
    if req.drop_probability > 0:
        seed = req.fault_seed if req.fault_seed is not None else req.scenario.seed
        fault = LinkFaultModel(req.drop_probability, seed=seed)

    oracle = None
    if req.oracle is not None:
        oracle = SimpleNamespace(
            objective=req.oracle.objective, load=np.asarray(req.oracle.load)
        )

    trace: list[ConvergenceSample] = []
    result = run(
        problem,
        topology,
        config,
        trace_sink=trace.append,
        fault=fault,
        oracle=oracle,
    )
    schedules = np.stack([a.x for a in result.agents])
    assembled = kkt_residual(problem, assemble_candidate(result.agents, problem))
    rows = [_trace_row(s) for s in trace]
    return m.DistributedRunResponse(
        iterations=result.iterations,
        stop_reason=result.stop_reason,
        objective=evaluate_objective(problem.cost, result.final_load),
        final_load=result.final_load.tolist(),
        schedules=schedules.tolist(),
        pev_ids=[p.id for p in req.scenario.fleet],
        trace=rows if req.include_trace else [],
        final=rows[-1],
        assembled_residuals=m.ResidualModel(**assembled.as_dict()),
    )


@app.post("/analysis/compare", response_model=m.CompareResponse)
async def analysis_compare(req: m.CompareRequest) -> m.CompareResponse:
    problem = compile_problem(req.scenario)
    schedules = np.asarray(req.schedules, dtype=np.float64)
    if schedules.shape != (problem.num_vehicles, problem.num_steps):
        raise ScenarioError(
            f"schedules shape {schedules.shape} does not match scenario "
            f"({problem.num_vehicles} vehicles x {problem.num_steps} steps)"
        )
    central_load = np.asarray(req.central.load, dtype=np.float64)
    objective = evaluate_objective(problem.cost, schedules.sum(axis=0))
    inelastic = problem.cost.inelastic_load_kw
    valley_central = valley_filling_stats(central_load, inelastic)
    valley_distributed = valley_filling_stats(schedules.sum(axis=0), inelastic)
    return m.CompareResponse(
        rel_obj=rel_obj(objective, req.central.objective),
        rel_load=rel_load(schedules, central_load),
        valley_central=m.ValleyStatsModel(**dataclasses.asdict(valley_central)),
        valley_distributed=m.ValleyStatsModel(**dataclasses.asdict(valley_distributed)),
        series=req.trace or [],
    )


@app.post("/topology/diameter", response_model=m.DiameterResponse)
async def topology_diameter(req: m.DiameterRequest) -> m.DiameterResponse:
    topology = build_topology(req.kind, req.num_agents, req.edges)
    degrees = [len(n) for n in topology.neighbor_lists()]
    return m.DiameterResponse(
        num_agents=topology.num_agents,
        num_edges=len(topology.edges),
        diameter=graph_diameter(topology),
        min_degree=min(degrees),
        max_degree=max(degrees),
    )
