"""Quadratic serving-cost model for the aggregate charging load.

Minimizing the cost of serving inelastic demand plus vehicle demand, when
that cost is quadratic in the combined load, is equivalent (up to a constant)
to minimizing ``c1 * ||L||^2 + c2 . L`` in the vehicle load alone, with the
coefficients below absorbing the inelastic profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CostModel",
    "derive_cost_coefficients",
    "evaluate_objective",
    "scale_for_fleet_share",
]


@dataclass(frozen=True)
class CostModel:
    """Coefficients of the reduced quadratic objective in the fleet load."""

    c1: float
    c2: np.ndarray
    inelastic_load_kw: np.ndarray
    a_tilde: float
    b_tilde: float

    @property
    def num_steps(self) -> int:
        return self.c2.shape[0]


def derive_cost_coefficients(a_tilde: float, b_tilde: float, inelastic_load: np.ndarray) -> CostModel:
    """Fold the serving-cost scalars and the inelastic profile into (c1, c2).

    c1 = b_tilde and c2 = a_tilde + 2 * b_tilde * inelastic, elementwise; the
    dropped constant does not move the minimizer.
    """
    inelastic = np.asarray(inelastic_load, dtype=np.float64)
    if b_tilde <= 0:
        raise ValueError(f"b_tilde must be positive for a strictly convex cost, got {b_tilde}")
    if inelastic.ndim != 1:
        raise ValueError("inelastic_load must be a 1-D profile")
    if (inelastic < 0).any():
        raise ValueError("inelastic_load must be nonnegative")
    c2 = a_tilde + 2.0 * b_tilde * inelastic
    return CostModel(
        c1=float(b_tilde),
        c2=c2,
        inelastic_load_kw=inelastic,
        a_tilde=float(a_tilde),
        b_tilde=float(b_tilde),
    )


def evaluate_objective(model: CostModel, load: np.ndarray) -> float:
    """c1 * sum(load^2) + sum(c2 * load) for a fleet load profile in kW."""
    load = np.asarray(load, dtype=np.float64)
    if load.shape != model.c2.shape:
        raise ValueError(f"load has shape {load.shape}, expected {model.c2.shape}")
    return float(model.c1 * load @ load + model.c2 @ load)


def scale_for_fleet_share(
    inelastic_load: np.ndarray, fleet_energy_kwh: float, step_hours: float, share: float = 0.1
) -> float:
    """Factor to scale the inelastic profile so the fleet is ``share`` of total demand.

    The fleet's grid-side energy is pinned by the end-of-day balance of every
    vehicle, so the share condition reduces to a closed-form ratio:
    fleet = share / (1 - share) * inelastic.
    """
    inelastic = np.asarray(inelastic_load, dtype=np.float64)
    if not 0 < share < 1:
        raise ValueError(f"share must lie in (0, 1), got {share}")
    if fleet_energy_kwh < 0:
        raise ValueError("fleet_energy_kwh must be nonnegative")
    inelastic_energy = float(inelastic.sum() * step_hours)
    if inelastic_energy <= 0:
        raise ValueError("inelastic profile has no energy to scale")
    target_inelastic_energy = fleet_energy_kwh * (1.0 - share) / share
    return target_inelastic_energy / inelastic_energy
