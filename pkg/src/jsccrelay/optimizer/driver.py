"""Optimize the power split of every scheme of a scenario."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..eed import WORST, NetworkEed
from ..scenario import P1, P2, Scenario, SchemeDef
from .gp import GpResult, IterationRecord, run_generalized_programming
from .objective import EedObjective, report_network_eed

__all__ = ["OptimizedPoint", "optimize_point", "optimize_scenario"]


@dataclass(frozen=True)
class OptimizedPoint:
    scheme: str
    snr_db: float
    metric: str
    gp: GpResult
    report: NetworkEed  # independent draws, used for the reported objective
    objective: float
    stderr: float

    @property
    def beta_s(self) -> tuple[float, ...]:
        return self.gp.best.beta_s

    @property
    def beta_r(self) -> tuple[float, ...]:
        return self.gp.best.beta_r


def _weights(metric: str, n: int):
    if metric == P1:
        return np.full(n, 1.0 / n)
    if metric == P2:
        return WORST
    raise ValueError(f"unknown metric {metric!r}")


def optimize_point(
    scenario: Scenario,
    scheme: SchemeDef,
    snr_db: float,
    metric: str,
    callback: Callable[[IterationRecord], None] | None = None,
) -> OptimizedPoint:
    network = scenario.network(scheme.relay)
    model = scenario.model(scheme)
    energy = scenario.transmit_energy(snr_db)
    weights = _weights(metric, network.size)
    objective = EedObjective(
        scheme.layers, network, model, energy, energy, weights,
        draws=scenario.mc_draws, seed=scenario.seed,
    )
    gp = run_generalized_programming(
        objective, scenario.epsilon, scenario.max_iters, callback=callback
    )
    best = gp.best
    # report on a disjoint stream so the optimizer's draws do not flatter the result
    report = report_network_eed(
        scheme.layers, best.beta_s, best.beta_r or None, network, model, energy, energy,
        draws=scenario.report_draws, seed=(scenario.seed + 1) % 2**64,
    )
    value, se = report.objective(weights if metric == P1 else WORST)
    return OptimizedPoint(scheme.name, float(snr_db), metric, gp, report, value, se)


def optimize_scenario(
    scenario: Scenario,
    metric: str | None = None,
    snr_db: float | None = None,
) -> list[OptimizedPoint]:
    """Optimize every scheme of ``scenario`` at one SNR (default: each grid SNR)."""
    metrics = (metric,) if metric is not None else scenario.metrics()
    grid = (snr_db,) if snr_db is not None else scenario.snr_db
    return [
        optimize_point(scenario, scheme, snr, m)
        for snr in grid
        for scheme in scenario.schemes
        for m in metrics
    ]
