"""Compiled per-fleet optimization data shared by both solvers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cost import CostModel
from .fleet import (
    EnergyConstraintSet,
    PevSpec,
    PowerBounds,
    TimeGrid,
    build_energy_constraints,
    build_power_bounds,
)

__all__ = ["ChargingProblem"]


@dataclass(frozen=True)
class ChargingProblem:
    """One day-ahead coordination instance: cost model plus per-vehicle constraints."""

    grid: TimeGrid
    cost: CostModel
    specs: tuple[PevSpec, ...]
    constraints: tuple[EnergyConstraintSet, ...]
    bounds: tuple[PowerBounds, ...]

    @classmethod
    def build(cls, specs: list[PevSpec], grid: TimeGrid, cost: CostModel) -> "ChargingProblem":
        if not specs:
            raise ValueError("fleet must contain at least one vehicle")
        if cost.num_steps != grid.num_steps:
            raise ValueError(
                f"cost model covers {cost.num_steps} steps, grid has {grid.num_steps}"
            )
        return cls(
            grid=grid,
            cost=cost,
            specs=tuple(specs),
            constraints=tuple(build_energy_constraints(s, grid) for s in specs),
            bounds=tuple(build_power_bounds(s, grid) for s in specs),
        )

    @property
    def num_vehicles(self) -> int:
        return len(self.specs)

    @property
    def num_steps(self) -> int:
        return self.grid.num_steps

    @cached_property
    def b_matrix(self) -> np.ndarray:
        """Stacked right-hand sides, one row per vehicle: (V, 2T+2)."""
        return np.stack([c.b_vector for c in self.constraints])

    @cached_property
    def upper_bounds(self) -> np.ndarray:
        """Stacked power upper bounds: (V, T)."""
        return np.stack([b.upper for b in self.bounds])

    @cached_property
    def lower_bounds(self) -> np.ndarray:
        return np.stack([b.lower for b in self.bounds])

    @cached_property
    def eta_dt(self) -> np.ndarray:
        """Per-vehicle kWh delivered to the battery per kW of charging power."""
        return np.array([s.efficiency * self.grid.step_hours for s in self.specs])

    @cached_property
    def fleet_energy_kwh(self) -> float:
        """Grid-side energy the fleet must draw, fixed by the end-of-day balance."""
        return float(
            sum(s.consumption_kwh.sum() / s.efficiency for s in self.specs)
        )
