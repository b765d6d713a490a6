"""Greedy constructive solvers: B-QSRFP (service order), D-QSRFP (chain order), and BD."""

from __future__ import annotations

import math
import time
from fractions import Fraction

from msplace.chains import FunctionChain
from msplace.errors import InfeasibleScenarioError
from msplace.model import Scenario
from msplace.solvers.placement import Placement, SolverContext
from msplace.solvers.result import SolverResult, finish

SERVICE_ORDERS = ("pseudocode", "prose")


def _service_predecessors(scenario: Scenario) -> list[set[int]]:
    preds: list[set[int]] = [set() for _ in scenario.services]
    owner = scenario.owner
    for e in scenario.dependency_graph.edges:
        if e.acfc <= 0 or e.caller not in owner:
            continue
        a, b = owner[e.caller], owner[e.callee]
        if a != b:
            preds[b].add(a)
    return preds


def solve_b_qsrfp(scenario: Scenario, service_order: str = "pseudocode",
                  context: SolverContext | None = None) -> SolverResult:
    """Deploy services one at a time, always picking among those with no undeployed caller.

    With ``service_order="pseudocode"`` the candidate with the smallest capacity per
    resource unit goes first; ``"prose"`` takes the largest. Each service gets exactly
    its minimum instance count.
    """
    if service_order not in SERVICE_ORDERS:
        raise ValueError(f"service_order must be one of {SERVICE_ORDERS}")
    start = time.perf_counter()
    ctx = context if context is not None else SolverContext.build(scenario)
    pl = Placement(ctx)
    preds = _service_predecessors(scenario)
    sign = 1.0 if service_order == "pseudocode" else -1.0
    remaining = set(range(scenario.n_services))
    while remaining:
        blocked = {i: len(preds[i] & remaining) for i in remaining}
        # a cycle between services (possible when functions of the same services call
        # each other both ways) leaves no free candidate; take the least-blocked ones
        fewest = min(blocked.values())
        candidates = sorted(i for i, b in blocked.items() if b == fewest)
        chosen = min(candidates, key=lambda i: (sign * scenario.services[i].mu / scenario.services[i].r_s, i))
        if ctx.required[chosen] > 0:
            pl.deploy_spread(chosen, ctx.required[chosen])
        remaining.discard(chosen)
    wall = (time.perf_counter() - start) * 1000.0
    return finish(ctx, pl.X, "b-qsrfp", wall, {"service_order": service_order})


def transmission_score(chain: FunctionChain, scenario: Scenario) -> float:
    """Expected KB moved per unit time by one chain, counting the user access hop."""
    rate = scenario.total_demand(chain.entry)
    return sum(float(c) * scenario.functions[f].data for f, c in zip(chain.hops, chain.demand_coeff)) * rate


def chain_order(chains: tuple[FunctionChain, ...], scenario: Scenario) -> list[FunctionChain]:
    """Demanded chains by decreasing transmission score, ties by entry id."""
    demanded = [c for c in chains if scenario.total_demand(c.entry) > 0]
    return sorted(demanded, key=lambda c: (-transmission_score(c, scenario), c.entry))


def solve_d_qsrfp(scenario: Scenario, context: SolverContext | None = None) -> SolverResult:
    """Walk chains heaviest first, topping up each service's instances to cover its demand so far."""
    start = time.perf_counter()
    ctx = context if context is not None else SolverContext.build(scenario)
    pl = Placement(ctx)
    mu = scenario.mu_exact
    solved = [Fraction(0)] * scenario.n_services
    entry_totals: dict[str, Fraction] = {}
    for e in scenario.demand.entries:
        entry_totals[e.function] = entry_totals.get(e.function, Fraction(0)) + Fraction(e.rate)

    for chain in chain_order(ctx.chains, scenario):
        total = entry_totals[chain.entry]
        for f, coeff in zip(chain.hops, chain.demand_coeff):
            i = scenario.owner[f]
            lam_c = coeff * total
            lam_d = solved[i] + lam_c - pl.inst(i) * mu[i]
            if lam_d > 0:
                pl.deploy_spread(i, math.ceil(lam_d / mu[i]))
            solved[i] += lam_c
    wall = (time.perf_counter() - start) * 1000.0
    return finish(ctx, pl.X, "d-qsrfp", wall)


def solve_bd_qsrfp(scenario: Scenario, service_order: str = "pseudocode",
                   context: SolverContext | None = None) -> SolverResult:
    """Run B-QSRFP and D-QSRFP and keep the feasible scheme with the lower response time."""
    start = time.perf_counter()
    ctx = context if context is not None else SolverContext.build(scenario)
    results: dict[str, SolverResult] = {}
    details: dict[str, object] = {"service_order": service_order}
    for name, run in (("b-qsrfp", lambda: solve_b_qsrfp(scenario, service_order, ctx)),
                      ("d-qsrfp", lambda: solve_d_qsrfp(scenario, ctx))):
        try:
            res = run()
        except InfeasibleScenarioError as exc:
            details[name] = f"infeasible: {exc}"
            continue
        details[name] = res.t_system if res.feasible else "infeasible: constraints violated"
        if res.feasible:
            results[name] = res
    wall = (time.perf_counter() - start) * 1000.0
    if not results:
        raise InfeasibleScenarioError("neither B-QSRFP nor D-QSRFP produced a feasible scheme")
    best_name = min(results, key=lambda n: (results[n].t_system, n))
    best = results[best_name]
    details["chosen"] = best_name
    return SolverResult(best.scheme, best.t_system, wall, "bd-qsrfp", True, best.violations, details)
