"""Scheme comparison sweeps, their CSV/Markdown outputs and the simulator
cross-check suite."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .eed import network_eed
from .errors import ConfigurationError
from .hiermod import conditional_from_cumulative, cumulative_ser
from .link import Integrator
from .optimizer.driver import OptimizedPoint, optimize_point
from .scenario import Scenario
from .simkit import SimConfig, simulate_link, validate_factorization

__all__ = [
    "run_comparison",
    "emit_outputs",
    "results_csv",
    "trace_csv",
    "summary_markdown",
    "CheckResult",
    "validation_suite",
]


def _point(args) -> OptimizedPoint:
    scenario, name, snr, metric = args
    return optimize_point(scenario, scenario.scheme(name), snr, metric)


def run_comparison(scenario: Scenario, snr_grid=None, workers: int = 1) -> list[OptimizedPoint]:
    """Optimize every (SNR, scheme, metric) point; order is SNR, scheme, metric."""
    grid = tuple(scenario.snr_db if snr_grid is None else snr_grid)
    if not grid:
        raise ConfigurationError("the SNR grid is empty")
    jobs = [
        (scenario, s.name, float(snr), m)
        for snr in grid
        for s in scenario.schemes
        for m in scenario.metrics()
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point, jobs))
    return [_point(j) for j in jobs]


def _fmt(x: float) -> str:
    return repr(float(x))


def results_csv(results) -> str:
    width = max(len(p.beta_s) for p in results)
    header = ["scheme", "snr_db", "metric", "objective", "stderr"]
    header += [f"beta_s{l + 1}" for l in range(width)] + [f"beta_r{l + 1}" for l in range(width)]
    header += ["iters", "gap"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for p in results:
        bs = [_fmt(b) for b in p.beta_s] + [""] * (width - len(p.beta_s))
        br = [_fmt(b) for b in p.beta_r] + [""] * (width - len(p.beta_r))
        w.writerow([p.scheme, _fmt(p.snr_db), p.metric, _fmt(p.objective), _fmt(p.stderr)]
                   + bs + br + [p.gp.iterations, _fmt(p.gp.gap)])
    return buf.getvalue()


def trace_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "snr_db", "metric", "iteration", "z", "theta", "nu_s", "nu_r", "g", "d_min", "d_max"])
    for p in results:
        for r in p.gp.trace:
            w.writerow([p.scheme, _fmt(p.snr_db), p.metric, r.iteration, _fmt(r.z), _fmt(r.theta),
                        _fmt(r.nu_s), _fmt(r.nu_r), _fmt(r.g), _fmt(r.d_min), _fmt(r.d_max)])
    return buf.getvalue()


def summary_markdown(results) -> str:
    lines = [
        "# Power allocation results",
        "",
        "Objective: expected EED on independent reporting draws (+- one standard error).",
        "The gap is empirical: the inner search is not certified to be global.",
        "",
        "| scheme | SNR (dB) | metric | objective | stderr | beta_s | beta_r | iters | empirical gap | converged |",
        "|---|---|---|---|---|---|---|---|---|---|",
    ]
    for p in results:
        bs = ", ".join(f"{b:.4f}" for b in p.beta_s)
        br = ", ".join(f"{b:.4f}" for b in p.beta_r) or "-"
        lines.append(
            f"| {p.scheme} | {p.snr_db:g} | {p.metric} | {p.objective:.6f} | {p.stderr:.2e} "
            f"| ({bs}) | ({br}) | {p.gp.iterations} | {p.gp.gap:.2e} | {'yes' if p.gp.converged else 'no'} |"
        )
    return "\n".join(lines) + "\n"


def emit_outputs(results, out_dir) -> dict[str, Path]:
    """Write results.csv, trace.csv and summary.md into ``out_dir``."""
    results = list(results)
    if not results:
        raise ConfigurationError("no results to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "results": (out / "results.csv", results_csv(results)),
        "trace": (out / "trace.csv", trace_csv(results)),
        "summary": (out / "summary.md", summary_markdown(results)),
    }
    for path, text in files.values():
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return {k: v[0] for k, v in files.items()}


# --- simulator cross-checks -------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def validation_suite(scenario: Scenario, snr_db: float | None = None, symbols: int = 200_000,
                     seed: int = 0) -> list[CheckResult]:
    """Compare analytical quantities with the symbol-level simulator.

    Link SERs are checked at fixed gains, the conditional independence of
    the direct and relayed paths given the source symbol, and the expected
    EED of every scheme at a mid power split against a faded protocol run.
    """
    snr = scenario.snr_db[len(scenario.snr_db) // 2] if snr_db is None else snr_db
    checks = []
    for scheme in scenario.schemes:
        L = scheme.num_layers
        beta = 2.0 ** -np.arange(L)  # halving split: 1, (2/3, 1/3), (4/7, 2/7, 1/7)
        beta /= beta.sum()
        hs = scenario.hier_scheme(scheme, beta, snr)

        worst = 0.0
        for gain in (0.5, 2.0, 8.0):
            sim = simulate_link(hs, gain, symbols, seed)
            q = conditional_from_cumulative(cumulative_ser(hs.kinds, beta, hs.snr(gain)))
            se = np.sqrt(q * (1 - q) / np.maximum(sim["cond_trials"], 1))
            z = np.abs(sim["cond_ser"] - q) / np.where(se > 0, se, np.inf)
            worst = max(worst, float(np.nanmax(z)))
        checks.append(CheckResult(f"{scheme.name}: link SER", worst <= 4.0, f"max |z| = {worst:.2f}"))

        network = scenario.network(scheme.relay)
        model = scenario.model(scheme)
        relay = hs if scheme.relay else None
        cfg = SimConfig(symbols_per_slot=20, slots=max(1, symbols // 20), seed=seed)
        fac = validate_factorization(cfg, hs, relay, model, network)
        checks.append(CheckResult(f"{scheme.name}: path independence", fac.max_z <= 4.0,
                                  f"max |z| = {fac.max_z:.2f}"))
        ana = network_eed(hs, relay, network, model, Integrator(50_000, (seed + 1) % 2**64))
        rep = fac.report
        z = np.abs(ana.mean - rep.eed) / np.sqrt(ana.stderr**2 + rep.eed_stderr**2)
        checks.append(CheckResult(f"{scheme.name}: expected EED", float(z.max()) <= 4.0,
                                  f"max |z| = {z.max():.2f}"))
    return checks
