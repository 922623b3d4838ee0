"""Per-vehicle battery constraints, feasibility probes, and synthetic fleets.

Each vehicle's flexibility is captured by two local constraint objects: a
cumulative-energy polytope (state-of-charge window plus an end-of-day energy
balance) and per-step charging power bounds driven by the plug-in pattern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "PevSpec",
    "EnergyConstraintSet",
    "PowerBounds",
    "FleetGenParams",
    "VehicleFeasibility",
    "FeasibilityReport",
    "build_energy_constraints",
    "build_power_bounds",
    "battery_trajectory",
    "validate_feasibility",
    "generate_synthetic_fleet",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform scheduling grid: ``num_steps`` intervals of ``step_hours`` each."""

    num_steps: int
    step_hours: float

    def __post_init__(self) -> None:
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        if self.step_hours <= 0:
            raise ValueError(f"step_hours must be > 0, got {self.step_hours}")

    @property
    def horizon_hours(self) -> float:
        return self.num_steps * self.step_hours


@dataclass
class PevSpec:
    """Physical and mobility parameters of one vehicle.

    ``connection`` is a 0/1 vector marking the steps where the vehicle sits at
    a charging station; ``consumption_kwh`` holds the battery energy drawn
    while driving in each step. A step cannot both consume and be connected.
    """

    id: str
    capacity_kwh: float
    soc_min: float
    efficiency: float
    max_power_kw: float
    initial_energy_kwh: float
    connection: np.ndarray
    consumption_kwh: np.ndarray

    def __post_init__(self) -> None:
        self.connection = np.asarray(self.connection, dtype=np.int64)
        self.consumption_kwh = np.asarray(self.consumption_kwh, dtype=np.float64)

    @property
    def min_energy_kwh(self) -> float:
        return self.soc_min * self.capacity_kwh

    def validate(self, grid: TimeGrid) -> None:
        """Raise ValueError naming this vehicle if any invariant is broken."""
        pid = self.id
        if self.capacity_kwh <= 0:
            raise ValueError(f"{pid}: capacity_kwh must be positive")
        if not 0 <= self.soc_min < 1:
            raise ValueError(f"{pid}: soc_min must lie in [0, 1), got {self.soc_min}")
        if not 0 < self.efficiency <= 1:
            raise ValueError(f"{pid}: efficiency must lie in (0, 1], got {self.efficiency}")
        if self.max_power_kw < 0:
            raise ValueError(f"{pid}: max_power_kw must be nonnegative")
        if not self.min_energy_kwh <= self.initial_energy_kwh <= self.capacity_kwh:
            raise ValueError(
                f"{pid}: initial_energy_kwh {self.initial_energy_kwh} outside "
                f"[{self.min_energy_kwh}, {self.capacity_kwh}]"
            )
        for name, vec in (("connection", self.connection), ("consumption_kwh", self.consumption_kwh)):
            if vec.shape != (grid.num_steps,):
                raise ValueError(
                    f"{pid}: {name} has length {vec.shape[0] if vec.ndim == 1 else vec.shape}, "
                    f"expected {grid.num_steps}"
                )
        if not np.isin(self.connection, (0, 1)).all():
            raise ValueError(f"{pid}: connection entries must be 0 or 1")
        if (self.consumption_kwh < 0).any():
            raise ValueError(f"{pid}: consumption_kwh must be nonnegative")
        clash = (self.consumption_kwh > 0) & (self.connection == 1)
        if clash.any():
            step = int(np.argmax(clash))
            raise ValueError(
                f"{pid}: consumption while connected at step {step}; driving and "
                "charging steps must be disjoint"
            )


@dataclass(frozen=True)
class EnergyConstraintSet:
    """Cumulative-energy constraints in the form  a_matrix @ x <= b_vector.

    Row layout for a horizon of T steps:
      rows 0..T-1    upper state-of-charge bound at each step,
      rows T..2T-1   lower state-of-charge bound at each step,
      rows 2T, 2T+1  end-of-day energy balance as an opposed inequality pair.
    """

    a_matrix: np.ndarray
    b_vector: np.ndarray

    @property
    def num_steps(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def num_rows(self) -> int:
        return self.a_matrix.shape[0]


@dataclass(frozen=True)
class PowerBounds:
    """Per-step charging power box: lower is all zeros (no discharging)."""

    lower: np.ndarray
    upper: np.ndarray


def build_energy_constraints(spec: PevSpec, grid: TimeGrid) -> EnergyConstraintSet:
    """Build the (2T+2) x T constraint set for one vehicle.

    For any schedule x, ``a_matrix @ x <= b_vector`` holds exactly when the
    battery trajectory stays inside its state-of-charge window at every step
    and ends the horizon at its initial energy content.
    """
    spec.validate(grid)
    t_steps = grid.num_steps
    eta_dt = spec.efficiency * grid.step_hours

    tri = np.tril(np.ones((t_steps, t_steps)))
    total = np.ones((1, t_steps))
    a_matrix = eta_dt * np.vstack([tri, -tri, total, -total])

    cum_cons = np.cumsum(spec.consumption_kwh)
    b_upper = spec.capacity_kwh - spec.initial_energy_kwh + cum_cons
    b_lower = spec.initial_energy_kwh - spec.min_energy_kwh - cum_cons
    total_cons = cum_cons[-1]
    b_vector = np.concatenate([b_upper, b_lower, [total_cons, -total_cons]])
    return EnergyConstraintSet(a_matrix=a_matrix, b_vector=b_vector)


def build_power_bounds(spec: PevSpec, grid: TimeGrid) -> PowerBounds:
    """Zero/max-power box following the plug-in pattern."""
    spec.validate(grid)
    upper = spec.max_power_kw * spec.connection.astype(np.float64)
    return PowerBounds(lower=np.zeros(grid.num_steps), upper=upper)


def battery_trajectory(spec: PevSpec, grid: TimeGrid, x: np.ndarray) -> np.ndarray:
    """Battery energy content after each step for charging schedule ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (grid.num_steps,):
        raise ValueError(f"schedule has shape {x.shape}, expected ({grid.num_steps},)")
    eta_dt = spec.efficiency * grid.step_hours
    return spec.initial_energy_kwh + eta_dt * np.cumsum(x) - np.cumsum(spec.consumption_kwh)


@dataclass(frozen=True)
class VehicleFeasibility:
    """Outcome of the greedy feasibility probe for one vehicle."""

    pev_id: str
    feasible: bool
    strict_interior: bool
    floor_violation_kwh: float
    terminal_deficit_kwh: float


@dataclass(frozen=True)
class FeasibilityReport:
    vehicles: tuple[VehicleFeasibility, ...]

    @property
    def all_feasible(self) -> bool:
        return all(v.feasible for v in self.vehicles)

    def infeasible_ids(self) -> list[str]:
        return [v.pev_id for v in self.vehicles if not v.feasible]


def _max_charge_trajectory(spec: PevSpec, grid: TimeGrid, ceiling_kwh: float) -> np.ndarray:
    """Greedy probe: charge at full power whenever connected and below ceiling."""
    eta_dt = spec.efficiency * grid.step_hours
    energy = spec.initial_energy_kwh
    traj = np.empty(grid.num_steps)
    for t in range(grid.num_steps):
        if spec.connection[t]:
            rate = min(spec.max_power_kw, max(0.0, ceiling_kwh - energy) / eta_dt)
        else:
            rate = 0.0
        energy = energy + eta_dt * rate - spec.consumption_kwh[t]
        traj[t] = energy
    return traj


def _probe_vehicle(spec: PevSpec, grid: TimeGrid, margin_kwh: float) -> VehicleFeasibility:
    floor = spec.min_energy_kwh
    tol = 1e-9 * max(1.0, spec.capacity_kwh)

    traj = _max_charge_trajectory(spec, grid, ceiling_kwh=spec.capacity_kwh)
    floor_violation = max(0.0, float(floor - traj.min()))
    terminal_deficit = max(0.0, float(spec.initial_energy_kwh - traj[-1]))
    feasible = floor_violation <= tol and terminal_deficit <= tol

    # Strict interior of the state-of-charge rows: the same probe with the
    # window shrunk by a margin must still reach the terminal target both
    # from above (greedy) and from below (minimum total charge needed to
    # hold the raised floor must not exceed the consumption to be replaced).
    strict = False
    if feasible:
        traj_m = _max_charge_trajectory(spec, grid, ceiling_kwh=spec.capacity_kwh - margin_kwh)
        cum_cons = np.cumsum(spec.consumption_kwh)
        min_total_charge = max(0.0, float(np.max(cum_cons - (spec.initial_energy_kwh - floor - margin_kwh))))
        strict = bool(
            traj_m.min() >= floor + margin_kwh - tol
            and traj_m[-1] >= spec.initial_energy_kwh - tol
            and min_total_charge <= cum_cons[-1] + tol
        )
    return VehicleFeasibility(
        pev_id=spec.id,
        feasible=feasible,
        strict_interior=strict,
        floor_violation_kwh=floor_violation,
        terminal_deficit_kwh=terminal_deficit,
    )


def validate_feasibility(
    specs: list[PevSpec], grid: TimeGrid, strict_margin_kwh: float = 1e-6
) -> FeasibilityReport:
    """Probe every vehicle's constraint set for a feasible charging schedule.

    Infeasibility is reported, not raised: the probe charges at maximum power
    whenever connected (capped at the battery ceiling) and checks that this
    dominant trajectory never breaks the state-of-charge floor and recovers
    at least the energy consumed by end of day.
    """
    for spec in specs:
        spec.validate(grid)
    return FeasibilityReport(
        vehicles=tuple(_probe_vehicle(spec, grid, strict_margin_kwh) for spec in specs)
    )


@dataclass(frozen=True)
class FleetGenParams:
    """Knobs for the synthetic driving-pattern generator.

    The default pattern is a weekday commute: a morning and an evening trip
    with jittered departure times, durations, and energies, plus an optional
    midday trip. Vehicles are plugged in whenever they are not driving.
    """

    size: int = 100
    battery_sizes_kwh: tuple[float, ...] = (16.0, 24.0)
    max_power_kw: float = 11.0
    efficiency: float = 0.9
    soc_min: float = 0.2
    initial_soc_range: tuple[float, float] = (0.5, 0.9)
    commute_probability: float = 1.0
    midday_trip_probability: float = 0.3
    morning_departure_hour: tuple[float, float] = (7.75, 0.75)   # mean, std
    evening_return_hour: tuple[float, float] = (17.5, 1.0)       # mean, std
    midday_hour: tuple[float, float] = (12.5, 0.5)               # mean, std
    trip_duration_steps: tuple[int, int] = (2, 4)                # inclusive range
    trip_energy_kwh: tuple[float, float] = (1.0, 3.5)            # uniform range

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("fleet size must be >= 1")
        if not 0 <= self.commute_probability <= 1 or not 0 <= self.midday_trip_probability <= 1:
            raise ValueError("trip probabilities must lie in [0, 1]")
        if self.trip_energy_kwh[0] < 0 or self.trip_energy_kwh[1] < self.trip_energy_kwh[0]:
            raise ValueError("trip_energy_kwh range must be nonnegative and ordered")
        soc_lo, soc_hi = self.initial_soc_range
        if not self.soc_min <= soc_lo <= soc_hi <= 1:
            raise ValueError("initial_soc_range must lie within [soc_min, 1]")


class FleetGenerationError(RuntimeError):
    """Raised when the requested parameters cannot produce a feasible fleet."""


def _sample_trip_legs(params: FleetGenParams, grid: TimeGrid, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Sample non-overlapping (start, end) step windows for the day's trips."""
    steps_per_hour = 1.0 / grid.step_hours
    legs: list[tuple[int, int]] = []

    def add_leg(center_hour: float) -> None:
        duration = int(rng.integers(params.trip_duration_steps[0], params.trip_duration_steps[1] + 1))
        start = int(round(center_hour * steps_per_hour))
        start = max(0, min(grid.num_steps - duration, start))
        legs.append((start, start + duration))

    if rng.random() < params.commute_probability:
        add_leg(rng.normal(*params.morning_departure_hour))
        add_leg(rng.normal(*params.evening_return_hour))
        if rng.random() < params.midday_trip_probability:
            add_leg(rng.normal(*params.midday_hour))

    legs.sort()
    merged: list[tuple[int, int]] = []
    for leg in legs:
        if merged and leg[0] <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], leg[1]))
        else:
            merged.append(leg)
    return merged


def _sample_vehicle(
    params: FleetGenParams, grid: TimeGrid, rng: np.random.Generator, vehicle_id: str
) -> PevSpec:
    capacity = float(rng.choice(np.asarray(params.battery_sizes_kwh)))
    initial = float(rng.uniform(*params.initial_soc_range) * capacity)
    connection = np.ones(grid.num_steps, dtype=np.int64)
    consumption = np.zeros(grid.num_steps)
    for start, end in _sample_trip_legs(params, grid, rng):
        connection[start:end] = 0
        energy = rng.uniform(*params.trip_energy_kwh)
        consumption[start:end] += energy / (end - start)
    return PevSpec(
        id=vehicle_id,
        capacity_kwh=capacity,
        soc_min=params.soc_min,
        efficiency=params.efficiency,
        max_power_kw=params.max_power_kw,
        initial_energy_kwh=initial,
        connection=connection,
        consumption_kwh=consumption,
    )


def generate_synthetic_fleet(params: FleetGenParams, seed: int, grid: TimeGrid) -> list[PevSpec]:
    """Generate a feasible fleet, deterministic for a fixed seed.

    Vehicles that fail the feasibility probe (possible under extreme
    parameter choices) are resampled a bounded number of times before the
    parameters are rejected outright.
    """
    rng = np.random.default_rng(seed)
    fleet: list[PevSpec] = []
    max_attempts = 50
    for i in range(params.size):
        vehicle_id = f"pev-{i:03d}"
        for attempt in range(max_attempts):
            spec = _sample_vehicle(params, grid, rng, vehicle_id)
            if _probe_vehicle(spec, grid, margin_kwh=1e-6).feasible:
                fleet.append(spec)
                break
        else:
            raise FleetGenerationError(
                f"could not draw a feasible vehicle for {vehicle_id} in "
                f"{max_attempts} attempts; relax the trip energy or widen the "
                "state-of-charge window"
            )
    return fleet
