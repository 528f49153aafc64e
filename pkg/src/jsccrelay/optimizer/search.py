"""Batched multi-start compass (coordinate pattern) search on a box.

All starts advance together: each round polls ``+-step`` along every
coordinate of every start that is still active, evaluates the whole batch
with one call, and moves each start to its best improving poll point.  A
start whose polls all fail halves its step; it stops once the step drops
below ``min_step``.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

__all__ = ["SearchConfig", "SearchResult", "compass_search"]


@dataclass(frozen=True)
class SearchConfig:
    initial_step: float = 0.25
    shrink: float = 0.5
    min_step: float = 1e-4
    max_rounds: int = 500


@dataclass(frozen=True)
class SearchResult:
    x: np.ndarray
    value: float
    evaluations: int


def compass_search(
    f: Callable[[np.ndarray], np.ndarray],
    starts,
    lower: float = 0.0,
    upper: float = 1.0,
    config: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Minimize a batched function ``f: (B, D) -> (B,)`` over ``[lower, upper]^D``."""
    x = np.clip(np.atleast_2d(np.asarray(starts, dtype=float)), lower, upper)
    k, dim = x.shape
    fx = np.asarray(f(x), dtype=float)
    evals = k
    step = np.full(k, config.initial_step)
    moves = np.concatenate([np.eye(dim), -np.eye(dim)])  # (2D, D)
    for _ in range(config.max_rounds):
        active = np.flatnonzero(step >= config.min_step)
        if active.size == 0:
            break
        polls = x[active, None, :] + step[active, None, None] * moves[None]
        polls = np.clip(polls, lower, upper)
        fp = np.asarray(f(polls.reshape(-1, dim)), dtype=float).reshape(active.size, -1)
        evals += fp.size
        best = np.argmin(fp, axis=1)  # first minimum: deterministic tie break
        fbest = fp[np.arange(active.size), best]
        improved = fbest < fx[active]
        winners = active[improved]
        x[winners] = polls[improved, best[improved]]
        fx[winners] = fbest[improved]
        losers = active[~improved]
        step[losers] *= config.shrink
    i = int(np.argmin(fx))
    return SearchResult(x[i].copy(), float(fx[i]), evals)
