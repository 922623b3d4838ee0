"""Convergence measures and load-shaping statistics, plus the trace format."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .network import Topology, consensus_sums

__all__ = [
    "ConvergenceSample",
    "ValleyStats",
    "rel_obj",
    "rel_load",
    "consensus_disagreement",
    "valley_filling_stats",
    "write_trace_csv",
    "read_trace_csv",
]

TRACE_COLUMNS = ("iteration", "rel_obj", "rel_load", "consensus_disagreement", "max_kkt_residual")


@dataclass(frozen=True)
class ConvergenceSample:
    """One trace row; the relative measures are present only when an optimum is known."""

    iteration: int
    rel_obj: float | None
    rel_load: float | None
    consensus_disagreement: float
    max_kkt_residual: float


def rel_obj(f: float, f_star: float) -> float:
    """Relative distance |f - f*| / f* of an objective value from the optimum."""
    if f_star == 0:
        raise ZeroDivisionError("optimal objective is zero; relative distance undefined")
    return abs(f - f_star) / f_star


def rel_load(x_all: np.ndarray, load_star: np.ndarray) -> float:
    """Relative distance of the fleet's total energy from the optimal total."""
    x_all = np.atleast_2d(np.asarray(x_all, dtype=np.float64))
    star_total = float(np.asarray(load_star, dtype=np.float64).sum())
    if star_total <= 0:
        raise ZeroDivisionError("optimal load total is zero; relative distance undefined")
    return abs(float(x_all.sum()) - star_total) / star_total


def consensus_disagreement(prices: np.ndarray, topology: Topology) -> float:
    """Max over agents of the sup-norm neighborhood disagreement sum.

    Zero exactly when all price vectors coincide, the graph being connected.
    """
    return float(np.abs(consensus_sums(topology, None, np.atleast_2d(prices), 0)).max())


@dataclass(frozen=True)
class ValleyStats:
    """How the fleet load reshapes the combined profile."""

    inelastic_variance: float
    combined_variance: float
    inelastic_peak_kw: float
    combined_peak_kw: float
    valley_energy_fraction: float


def valley_filling_stats(pev_load: np.ndarray, inelastic: np.ndarray) -> ValleyStats:
    """Variance/peak comparison plus the share of fleet energy placed in the valley.

    The valley is the lowest-inelastic-load third of the time steps.
    """
    pev_load = np.asarray(pev_load, dtype=np.float64)
    inelastic = np.asarray(inelastic, dtype=np.float64)
    if pev_load.shape != inelastic.shape:
        raise ValueError(
            f"profiles differ in length: {pev_load.shape} vs {inelastic.shape}"
        )
    combined = pev_load + inelastic
    total = float(pev_load.sum())
    n_valley = max(1, inelastic.shape[0] // 3)
    valley_idx = np.argsort(inelastic, kind="stable")[:n_valley]
    fraction = float(pev_load[valley_idx].sum() / total) if total > 0 else 0.0
    return ValleyStats(
        inelastic_variance=float(inelastic.var()),
        combined_variance=float(combined.var()),
        inelastic_peak_kw=float(inelastic.max()),
        combined_peak_kw=float(combined.max()),
        valley_energy_fraction=fraction,
    )


def _format(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_trace_csv(samples: list[ConvergenceSample], path) -> None:
    """One row per iteration; empty cells where no optimum was supplied."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for s in samples:
            writer.writerow([
                s.iteration,
                _format(s.rel_obj),
                _format(s.rel_load),
                _format(s.consensus_disagreement),
                _format(s.max_kkt_residual),
            ])


def read_trace_csv(path) -> list[ConvergenceSample]:
    samples = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace columns {reader.fieldnames}")
        for row in reader:
            samples.append(ConvergenceSample(
                iteration=int(row["iteration"]),
                rel_obj=float(row["rel_obj"]) if row["rel_obj"] else None,
                rel_load=float(row["rel_load"]) if row["rel_load"] else None,
                consensus_disagreement=float(row["consensus_disagreement"]),
                max_kkt_residual=float(row["max_kkt_residual"]),
            ))
    return samples
