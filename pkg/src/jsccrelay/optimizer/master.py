"""Master linear program over candidate power vectors, and its dual.

Column ``l`` is a candidate with objective value ``obj[l]`` and constraint
slack ``rows[i, l] = sum(beta_l^(i)) - 1`` for every transmitting node ``i``.
The master picks convex weights ``lam`` minimizing the mixed objective
while keeping every node's mixed slack nonpositive.  The dual maximizes
``theta`` subject to ``theta <= obj[l] + sum_i nu[i] * rows[i, l]`` with
``nu >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .simplex import linprog

__all__ = ["MasterSolution", "DualSolution", "solve_master_lp", "solve_master_dual"]


@dataclass(frozen=True)
class MasterSolution:
    lam: np.ndarray | None
    z: float
    feasible: bool


@dataclass(frozen=True)
class DualSolution:
    nu: np.ndarray | None
    theta: float
    feasible: bool


def _check(objectives, constraint_rows):
    obj = np.asarray(objectives, dtype=float).ravel()
    rows = np.atleast_2d(np.asarray(constraint_rows, dtype=float))
    if obj.size < 1:
        raise ConfigurationError("the master needs at least one candidate")
    if not np.all(np.isfinite(obj)):
        raise ConfigurationError("candidate objectives must be finite")
    if rows.shape[1] != obj.size:
        raise ConfigurationError(f"{rows.shape[1]} constraint columns for {obj.size} candidates")
    return obj, rows


def solve_master_lp(objectives, constraint_rows) -> MasterSolution:
    obj, rows = _check(objectives, constraint_rows)
    k = obj.size
    res = linprog(obj, A_ub=rows, b_ub=np.zeros(rows.shape[0]),
                  A_eq=np.ones((1, k)), b_eq=[1.0])
    if not res.ok:
        return MasterSolution(None, np.inf, False)
    return MasterSolution(res.x, res.fun, True)


def solve_master_dual(objectives, constraint_rows) -> DualSolution:
    obj, rows = _check(objectives, constraint_rows)
    n_nodes = rows.shape[0]
    # variables: theta+ , theta- , nu_1..nu_n ; maximize theta
    c = np.concatenate([[-1.0, 1.0], np.zeros(n_nodes)])
    A = np.hstack([np.ones((obj.size, 1)), -np.ones((obj.size, 1)), -rows.T])
    res = linprog(c, A_ub=A, b_ub=obj)
    if not res.ok:
        return DualSolution(None, np.inf, False)
    theta = res.x[0] - res.x[1]
    return DualSolution(res.x[2:], float(theta), True)
