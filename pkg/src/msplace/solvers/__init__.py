"""Deployment-scheme solvers and a single dispatch entry point."""

from __future__ import annotations

import time

from msplace.model import Scenario
from msplace.solvers.baselines import OPTIMAL_GUARD, exhaustive_optimal, solve_random
from msplace.solvers.greedy import (
    SERVICE_ORDERS,
    chain_order,
    solve_b_qsrfp,
    solve_bd_qsrfp,
    solve_d_qsrfp,
    transmission_score,
)
from msplace.solvers.improve import improvement_pass
from msplace.solvers.placement import Placement, SolverContext, best_server, deploy_spread
from msplace.solvers.result import SolverResult, finish

ALGORITHMS = ("b-qsrfp", "d-qsrfp", "bd-qsrfp", "random", "optimal")


def solve(scenario: Scenario, algorithm: str, *, improve: bool = False, seed: int = 0, trials: int = 100,
          service_order: str = "pseudocode", guard: int = OPTIMAL_GUARD) -> SolverResult:
    """Run one named algorithm, optionally followed by the improvement pass."""
    start = time.perf_counter()
    ctx = SolverContext.build(scenario)
    if algorithm == "b-qsrfp":
        res = solve_b_qsrfp(scenario, service_order, ctx)
    elif algorithm == "d-qsrfp":
        res = solve_d_qsrfp(scenario, ctx)
    elif algorithm == "bd-qsrfp":
        res = solve_bd_qsrfp(scenario, service_order, ctx)
    elif algorithm == "random":
        res = solve_random(scenario, trials, seed, ctx)
    elif algorithm == "optimal":
        res = exhaustive_optimal(scenario, guard, ctx)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    if not (improve and res.feasible):
        return res

    improved = improvement_pass(res.scheme.as_array(), scenario, context=ctx)
    wall = (time.perf_counter() - start) * 1000.0
    details = dict(res.details, improved=True, t_before=res.t_system)
    return finish(ctx, improved, res.algorithm, wall, details)


__all__ = [
    "ALGORITHMS",
    "OPTIMAL_GUARD",
    "SERVICE_ORDERS",
    "Placement",
    "SolverContext",
    "SolverResult",
    "best_server",
    "chain_order",
    "deploy_spread",
    "exhaustive_optimal",
    "improvement_pass",
    "solve",
    "solve_b_qsrfp",
    "solve_bd_qsrfp",
    "solve_d_qsrfp",
    "solve_random",
    "transmission_score",
]
