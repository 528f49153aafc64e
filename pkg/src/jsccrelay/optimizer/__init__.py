"""Power-allocation optimizer: LP master, dual pricing and inner search."""
from .gp import (
    GpResult,
    GpState,
    IterationRecord,
    PowerCandidate,
    initial_candidates,
    minimize_dual_function,
    run_generalized_programming,
)
from .master import solve_master_dual, solve_master_lp
from .objective import EedObjective, GridSpec
from .search import SearchConfig, compass_search
from .driver import OptimizedPoint, optimize_point, optimize_scenario
from .simplex import linprog

__all__ = [
    "EedObjective",
    "OptimizedPoint",
    "optimize_point",
    "optimize_scenario",
    "GpResult",
    "GpState",
    "GridSpec",
    "IterationRecord",
    "PowerCandidate",
    "SearchConfig",
    "compass_search",
    "initial_candidates",
    "linprog",
    "minimize_dual_function",
    "run_generalized_programming",
    "solve_master_dual",
    "solve_master_lp",
]
