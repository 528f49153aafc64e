"""Generalized programming for per-layer power allocation.

The outer loop keeps a growing set of candidate power vectors.  A master LP
mixes them under the per-node power budgets; its dual prices the budgets
with multipliers ``nu``.  The inner step minimizes the priced Lagrangian
``f(beta) + sum_i nu_i (1'beta_i - 1)`` over the box and adds the result as
a new candidate.  The master value ``z_k`` is an upper estimate of the
convexified optimum and the inner value ``g_k`` a lower one; the loop stops
when the gap between the best of each falls below ``epsilon``.

The inner problem is nonconvex and solved by pattern search, so ``g_k`` is
an empirical bound, not a certificate.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from .master import solve_master_dual, solve_master_lp
from .search import SearchConfig, compass_search

__all__ = [
    "PowerCandidate",
    "GpState",
    "IterationRecord",
    "GpResult",
    "initial_candidates",
    "minimize_dual_function",
    "run_generalized_programming",
]

_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class PowerCandidate:
    beta_s: tuple[float, ...]
    beta_r: tuple[float, ...] = ()

    def __post_init__(self):
        bs = tuple(float(b) for b in self.beta_s)
        br = tuple(float(b) for b in self.beta_r)
        if any(not b >= 0 for b in bs + br):
            raise ConfigurationError(f"power fractions must be nonnegative: {bs}, {br}")
        object.__setattr__(self, "beta_s", bs)
        object.__setattr__(self, "beta_r", br)

    @property
    def slacks(self) -> np.ndarray:
        """``1'beta - 1`` per transmitting node (source first)."""
        out = [sum(self.beta_s) - 1.0]
        if self.beta_r:
            out.append(sum(self.beta_r) - 1.0)
        return np.array(out)

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.slacks <= _FEAS_TOL))

    def normalized(self) -> "PowerCandidate":
        """Scale each node's vector down onto its budget if it exceeds it."""
        def fit(b):
            total = sum(b)
            return tuple(x / total for x in b) if total > 1.0 else b
        return PowerCandidate(fit(self.beta_s), fit(self.beta_r))


@dataclass
class GpState:
    candidates: list[PowerCandidate]
    objectives: list[float]
    lam: np.ndarray | None = None
    nu: np.ndarray | None = None
    z: float = np.inf
    theta: float = -np.inf
    d_min: float = -np.inf
    d_max: float = np.inf
    objective_cache: dict = field(default_factory=dict)

    def constraint_rows(self) -> np.ndarray:
        return np.stack([c.slacks for c in self.candidates], axis=1)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    z: float
    theta: float
    nu_s: float
    nu_r: float
    g: float
    d_min: float
    d_max: float


@dataclass(frozen=True)
class GpResult:
    best: PowerCandidate
    objective: float
    d_min: float
    d_max: float
    converged: bool
    trace: tuple[IterationRecord, ...]
    state: GpState

    @property
    def gap(self) -> float:
        return self.d_max - self.d_min

    @property
    def iterations(self) -> int:
        return len(self.trace)


def _split(x: np.ndarray, num_layers: int, relayed: bool):
    if relayed:
        return x[..., :num_layers], x[..., num_layers:]
    return x, None


def _batch_objective(objective, x: np.ndarray) -> np.ndarray:
    bs, br = _split(x, objective.num_layers, objective.relayed)
    return np.asarray(objective(bs, br), dtype=float)


def _to_vector(c: PowerCandidate) -> np.ndarray:
    return np.array(c.beta_s + c.beta_r)


def _from_vector(x: np.ndarray, num_layers: int, relayed: bool) -> PowerCandidate:
    bs, br = _split(np.asarray(x), num_layers, relayed)
    return PowerCandidate(tuple(bs), tuple(br) if br is not None else ())


def initial_candidates(num_layers: int, relayed: bool) -> list[PowerCandidate]:
    """Strictly interior uniform split plus the scaled one-hot vectors."""
    L = num_layers
    out = [np.full(L, 1.0 / (L + 1))]
    out += [0.9 * np.eye(L)[l] for l in range(L)]
    return [PowerCandidate(tuple(b), tuple(b) if relayed else ()) for b in out]


def _starts(num_layers: int, relayed: bool, extra) -> np.ndarray:
    L = num_layers
    per_node = [
        np.zeros(L),
        np.ones(L),
        np.eye(L)[0],
        np.eye(L)[-1],
        np.full(L, 0.5),
        np.full(L, 1.0 / (L + 1)),
    ]
    rows = [np.concatenate([b, b]) if relayed else b for b in per_node]
    rows += [np.asarray(x, dtype=float) for x in extra]
    return np.stack(rows)


def minimize_dual_function(
    nu,
    objective,
    config: SearchConfig = SearchConfig(),
    extra_starts=(),
) -> tuple[PowerCandidate, float]:
    """Approximately minimize ``f(beta) + sum_i nu_i (1'beta_i - 1)`` over ``[0, 1]^L`` per node.

    ``objective`` is a batched callable ``(beta_s, beta_r) -> values`` with
    ``num_layers`` and ``relayed`` attributes.  Returns the best point found
    and its Lagrangian value.
    """
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ConfigurationError(f"multipliers must be nonnegative: {nu}")
    L, relayed = objective.num_layers, objective.relayed
    nodes = 2 if relayed else 1
    if nu.shape != (nodes,):
        raise ConfigurationError(f"expected {nodes} multipliers, got {nu.shape}")

    def lagrangian(x):
        penalty = nu[0] * (x[:, :L].sum(axis=1) - 1.0)
        if relayed:
            penalty = penalty + nu[1] * (x[:, L:].sum(axis=1) - 1.0)
        return _batch_objective(objective, x) + penalty

    res = compass_search(lagrangian, _starts(L, relayed, extra_starts), 0.0, 1.0, config)
    return _from_vector(res.x, L, relayed), res.value


def _evaluate(objective, state: GpState, cands) -> list[float]:
    todo = [c for c in cands if c not in state.objective_cache]
    if todo:
        vals = _batch_objective(objective, np.stack([_to_vector(c) for c in todo]))
        state.objective_cache.update(zip(todo, map(float, vals)))
    return [state.objective_cache[c] for c in cands]


def run_generalized_programming(
    objective,
    epsilon: float = 1e-3,
    max_iters: int = 100,
    initial: list[PowerCandidate] | None = None,
    search: SearchConfig = SearchConfig(),
    callback: Callable[[IterationRecord], None] | None = None,
) -> GpResult:
    """Run the outer loop; return the best budget-feasible power vector found.

    The returned point is the lowest-objective one among the budget-feasible
    candidates, the rescaled infeasible candidates (including the last inner
    minimizer) and the master's convex mixture of candidates.
    """
    if not epsilon > 0:
        raise ConfigurationError("epsilon must be positive")
    if max_iters < 1:
        raise ConfigurationError("max_iters must be at least 1")
    L, relayed = objective.num_layers, objective.relayed
    cands = list(initial) if initial is not None else initial_candidates(L, relayed)
    if not any(np.all(c.slacks < 0) for c in cands):
        raise ConfigurationError("the initial set needs a strictly interior candidate")
    state = GpState(cands, [])
    state.objectives = _evaluate(objective, state, cands)

    trace = []
    converged = False
    incumbent = None
    for k in range(1, max_iters + 1):
        rows = state.constraint_rows()
        master = solve_master_lp(state.objectives, rows)
        dual = solve_master_dual(state.objectives, rows)
        if not (master.feasible and dual.feasible):
            raise ConfigurationError("master problem became infeasible")
        state.lam, state.z = master.lam, master.z
        state.nu, state.theta = dual.nu, dual.theta
        state.d_max = min(state.d_max, state.z)

        # the candidate attaining the dual value keeps g_k <= Theta_k
        priced = np.asarray(state.objectives) + dual.nu @ rows
        extra = [_to_vector(state.candidates[int(np.argmin(priced))])]
        if incumbent is not None:
            extra.append(_to_vector(incumbent))
        incumbent, g = minimize_dual_function(dual.nu, objective, search, extra)
        state.d_min = max(state.d_min, g)

        rec = IterationRecord(
            k, state.z, state.theta, float(dual.nu[0]),
            float(dual.nu[1]) if relayed else 0.0, g, state.d_min, state.d_max,
        )
        trace.append(rec)
        if callback is not None:
            callback(rec)
        if state.d_max - state.d_min <= epsilon:
            converged = True
            break
        if incumbent not in state.objective_cache:
            state.candidates.append(incumbent)
            state.objectives += _evaluate(objective, state, [incumbent])

    best, value = _best_feasible(objective, state, relayed, incumbent)
    return GpResult(best, value, state.d_min, state.d_max, converged, tuple(trace), state)


def _best_feasible(objective, state: GpState, relayed: bool, last: PowerCandidate | None):
    cands = state.candidates + ([last] if last is not None else [])
    pool = [c if c.feasible else c.normalized() for c in cands]
    if state.lam is not None:
        mix = state.lam @ np.stack([_to_vector(c) for c in state.candidates])
        mixture = _from_vector(mix, objective.num_layers, relayed).normalized()
        pool.append(mixture)
    pool = list(dict.fromkeys(pool))
    values = _evaluate(objective, state, pool)
    i = int(np.argmin(values))
    return pool[i], values[i]
