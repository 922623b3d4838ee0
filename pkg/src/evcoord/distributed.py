"""Per-agent price coordination updates and the synchronous round loop.

Every charging station runs four local updates per round: a price update
mixing a neighborhood consensus term with a local supply/demand innovation
term, a closed-form refresh of its fleet-load estimate, a projected gradient
step on its own schedule, and a projected ascent step on its energy-row
multipliers. Only price vectors travel between agents.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .cost import CostModel, evaluate_objective
from .fleet import EnergyConstraintSet, PowerBounds
from .metrics import ConvergenceSample, rel_load, rel_obj
from .network import LinkFaultModel, Topology, consensus_sums
from .problem import ChargingProblem

if TYPE_CHECKING:
    from .central import CentralSolution

__all__ = [
    "AgentState",
    "TuningSchedule",
    "SolverConfig",
    "RunResult",
    "price_update",
    "load_estimate_update",
    "schedule_update",
    "mu_update",
    "step_sizes",
    "run",
]


@dataclass
class AgentState:
    """One agent's local iterates.

    ``x`` is its own charging schedule (kW), ``load_estimate`` its view of
    the whole fleet's load, ``price`` its copy of the shared price vector,
    and ``mu`` the multipliers of its energy-constraint rows.
    """

    x: np.ndarray
    load_estimate: np.ndarray
    price: np.ndarray
    mu: np.ndarray

    def copy(self) -> "AgentState":
        return AgentState(
            x=self.x.copy(),
            load_estimate=self.load_estimate.copy(),
            price=self.price.copy(),
            mu=self.mu.copy(),
        )


@dataclass(frozen=True)
class TuningSchedule:
    """Iteration-indexed step sizes.

    The price update uses decaying consensus and innovation weights
    beta_k = beta0 / (k+1)^tau_beta and alpha_k = alpha0 / (k+1)^tau_alpha.
    Both sequences decay, both have divergent sums, and beta_k/alpha_k grows
    without bound, which requires 0 < tau_beta < tau_alpha <= 1. The schedule
    and multiplier steps gamma and delta stay constant.
    """

    alpha0: float
    beta0: float
    gamma: float
    delta: float
    tau_alpha: float = 0.6
    tau_beta: float = 0.51

    def __post_init__(self) -> None:
        for name in ("alpha0", "beta0", "gamma", "delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.tau_beta < self.tau_alpha <= 1:
            raise ValueError(
                f"need 0 < tau_beta < tau_alpha <= 1, got "
                f"tau_beta={self.tau_beta}, tau_alpha={self.tau_alpha}"
            )


def step_sizes(sched: TuningSchedule, k: int) -> tuple[float, float, float, float]:
    """(alpha_k, beta_k, gamma, delta) at iteration k >= 0."""
    if k < 0:
        raise ValueError("iteration index must be nonnegative")
    alpha = sched.alpha0 / (k + 1) ** sched.tau_alpha
    beta = sched.beta0 / (k + 1) ** sched.tau_beta
    return alpha, beta, sched.gamma, sched.delta


@dataclass(frozen=True)
class SolverConfig:
    """Loop bounds, stop tolerances, tuning, and update ordering mode.

    ``parallel`` mode evaluates every update from the previous round's state
    (all agents can compute concurrently); ``serial`` sweeps the agents in
    index order, each using the freshest values already written this round.
    """

    max_iterations: int
    schedule: TuningSchedule
    tol_consensus: float = 1e-9
    tol_kkt: float = 1e-9
    mode: str = "parallel"

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tol_consensus <= 0 or self.tol_kkt <= 0:
            raise ValueError("stop tolerances must be positive")
        if self.mode not in ("parallel", "serial"):
            raise ValueError(f"mode must be 'parallel' or 'serial', got {self.mode!r}")


def price_update(
    state: AgentState,
    neighbor_prices: list[np.ndarray],
    fleet_size: int,
    k: int,
    sched: TuningSchedule,
) -> np.ndarray:
    """Consensus step toward the neighbors' prices plus the local innovation.

    The innovation term raises the price when this agent consumes more than
    its estimated per-agent share of the fleet load, and lowers it otherwise.
    No projection is applied.
    """
    if fleet_size <= 0:
        raise ValueError("fleet_size must be positive")
    alpha, beta, _, _ = step_sizes(sched, k)
    disagreement = np.zeros_like(state.price)
    for nbr in neighbor_prices:
        if nbr.shape != state.price.shape:
            raise ValueError("neighbor price vector has mismatched length")
        disagreement += state.price - nbr
    innovation = state.load_estimate / fleet_size - state.x
    return state.price - beta * disagreement - alpha * innovation


def load_estimate_update(state: AgentState, cost: CostModel) -> np.ndarray:
    """Closed-form refresh of the fleet-load estimate, clipped to [0, inf)."""
    return np.maximum((state.price - cost.c2) / (2.0 * cost.c1), 0.0)


def schedule_update(
    state: AgentState,
    cons: EnergyConstraintSet,
    bounds: PowerBounds,
    sched: TuningSchedule,
) -> np.ndarray:
    """Gradient step against price and energy-row pressure, clamped to the box.

    The clamp plays the role of the power-bound multipliers, which therefore
    never appear as explicit iterates.
    """
    descent = state.x - sched.delta * (state.price + cons.a_matrix.T @ state.mu)
    return np.clip(descent, bounds.lower, bounds.upper)


def mu_update(state: AgentState, cons: EnergyConstraintSet, sched: TuningSchedule) -> np.ndarray:
    """Ascent step on the energy-row multipliers, projected onto [0, inf)."""
    ascent = state.mu + sched.gamma * (cons.a_matrix @ state.x - cons.b_vector)
    return np.maximum(ascent, 0.0)


@dataclass
class RunResult:
    agents: list[AgentState]
    iterations: int
    stop_reason: str
    final_load: np.ndarray


def _initial_state(problem: ChargingProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Default cold start: price at the inelastic marginal cost, all else zero."""
    n_vehicles, n_steps = problem.num_vehicles, problem.num_steps
    n_rows = problem.constraints[0].num_rows
    prices = np.tile(problem.cost.c2, (n_vehicles, 1))
    return (
        np.zeros((n_vehicles, n_steps)),
        np.zeros((n_vehicles, n_steps)),
        prices,
        np.zeros((n_vehicles, n_rows)),
    )


def _energy_rows(x: np.ndarray, eta_dt: np.ndarray) -> np.ndarray:
    """Stacked evaluation of each vehicle's energy rows: (V, T) -> (V, 2T+2)."""
    cs = eta_dt[:, None] * np.cumsum(x, axis=1)
    return np.concatenate([cs, -cs, cs[:, -1:], -cs[:, -1:]], axis=1)


def _energy_adjoint(mu: np.ndarray, eta_dt: np.ndarray, n_steps: int) -> np.ndarray:
    """Stacked transpose action of the energy rows: (V, 2T+2) -> (V, T)."""
    diff = mu[:, :n_steps] - mu[:, n_steps:2 * n_steps]
    rev_cum = np.cumsum(diff[:, ::-1], axis=1)[:, ::-1]
    terminal = mu[:, 2 * n_steps] - mu[:, 2 * n_steps + 1]
    return eta_dt[:, None] * (rev_cum + terminal[:, None])


def _natural_residual(
    problem: ChargingProblem,
    x: np.ndarray,
    load_est: np.ndarray,
    prices: np.ndarray,
    mu: np.ndarray,
    energy_rows: np.ndarray,
    energy_adjoint: np.ndarray,
) -> float:
    """Max over agents of the unit-step fixed-point residuals of the updates."""
    c1, c2 = problem.cost.c1, problem.cost.c2
    r_x = x - np.clip(x - (prices + energy_adjoint), problem.lower_bounds, problem.upper_bounds)
    r_load = load_est - np.maximum((prices - c2) / (2.0 * c1), 0.0)
    r_mu = mu - np.maximum(mu + (energy_rows - problem.b_matrix), 0.0)
    return float(max(np.abs(r_x).max(), np.abs(r_load).max(), np.abs(r_mu).max()))


def _as_agents(x, load_est, prices, mu) -> list[AgentState]:
    return [
        AgentState(x=x[v].copy(), load_estimate=load_est[v].copy(),
                   price=prices[v].copy(), mu=mu[v].copy())
        for v in range(x.shape[0])
    ]


def run(
    problem: ChargingProblem,
    topology: Topology,
    config: SolverConfig,
    trace_sink: Callable[[ConvergenceSample], None] | None = None,
    fault: LinkFaultModel | None = None,
    oracle: "CentralSolution | None" = None,
    initial_agents: list[AgentState] | None = None,
    agent_sink: Callable[[int, list[AgentState]], None] | None = None,
) -> RunResult:
    """Run synchronous coordination rounds until tolerance or the budget.

    Each round every agent computes its four updates and the price vectors
    are exchanged over the topology (optionally with link drops). A trace
    record per round carries the consensus disagreement and the local
    fixed-point residual, plus distances to ``oracle`` when one is supplied;
    ``agent_sink`` additionally receives per-agent state snapshots.
    Stops once both the disagreement and the residual fall below their
    tolerances.
    """
    n_vehicles = problem.num_vehicles
    if topology.num_agents != n_vehicles:
        raise ValueError(
            f"topology has {topology.num_agents} agents, fleet has {n_vehicles}"
        )
    if config.mode == "serial" and fault is not None:
        raise ValueError("link faults are only modeled for parallel rounds")

    if initial_agents is None:
        x, load_est, prices, mu = _initial_state(problem)
    else:
        if len(initial_agents) != n_vehicles:
            raise ValueError("initial_agents must match the fleet size")
        x = np.stack([a.x for a in initial_agents]).astype(np.float64)
        load_est = np.stack([a.load_estimate for a in initial_agents]).astype(np.float64)
        prices = np.stack([a.price for a in initial_agents]).astype(np.float64)
        mu = np.stack([a.mu for a in initial_agents]).astype(np.float64)

    c1, c2 = problem.cost.c1, problem.cost.c2
    eta_dt = problem.eta_dt
    n_steps = problem.num_steps
    lower, upper = problem.lower_bounds, problem.upper_bounds
    b_mat = problem.b_matrix
    sched = config.schedule

    rows = _energy_rows(x, eta_dt)
    adj = _energy_adjoint(mu, eta_dt, n_steps)
    adjacency = topology.neighbor_lists()

    iterations = 0
    stop_reason = "max_iterations"
    for k in range(config.max_iterations):
        if config.mode == "parallel":
            alpha, beta, gamma, delta = step_sizes(sched, k)
            nbr_sums = consensus_sums(topology, fault, prices, k)
            new_prices = prices - beta * nbr_sums - alpha * (load_est / n_vehicles - x)
            new_load = np.maximum((prices - c2) / (2.0 * c1), 0.0)
            new_x = np.clip(x - delta * (prices + adj), lower, upper)
            new_mu = np.maximum(mu + gamma * (rows - b_mat), 0.0)
            x, load_est, prices, mu = new_x, new_load, new_prices, new_mu
        else:
            for v in range(n_vehicles):
                state = AgentState(x=x[v], load_estimate=load_est[v], price=prices[v], mu=mu[v])
                prices[v] = price_update(
                    state, [prices[w] for w in adjacency[v]], n_vehicles, k, sched
                )
                state.price = prices[v]
                load_est[v] = load_estimate_update(state, problem.cost)
                x[v] = schedule_update(
                    state, problem.constraints[v], problem.bounds[v], sched
                )
                state.x = x[v]
                mu[v] = mu_update(state, problem.constraints[v], sched)

        rows = _energy_rows(x, eta_dt)
        adj = _energy_adjoint(mu, eta_dt, n_steps)
        iterations = k + 1
        if agent_sink is not None:
            agent_sink(iterations, _as_agents(x, load_est, prices, mu))

        disagreement = float(np.abs(consensus_sums(topology, None, prices, k)).max())
        residual = _natural_residual(problem, x, load_est, prices, mu, rows, adj)
        if trace_sink is not None:
            fleet_load = x.sum(axis=0)
            if oracle is not None:
                sample_rel_obj = rel_obj(
                    evaluate_objective(problem.cost, fleet_load), oracle.objective
                )
                sample_rel_load = rel_load(x, oracle.load)
            else:
                sample_rel_obj = None
                sample_rel_load = None
            trace_sink(ConvergenceSample(
                iteration=iterations,
                rel_obj=sample_rel_obj,
                rel_load=sample_rel_load,
                consensus_disagreement=disagreement,
                max_kkt_residual=residual,
            ))
        if disagreement <= config.tol_consensus and residual <= config.tol_kkt:
            stop_reason = "tolerance"
            break

    return RunResult(
        agents=_as_agents(x, load_est, prices, mu),
        iterations=iterations,
        stop_reason=stop_reason,
        final_load=x.sum(axis=0),
    )
