"""Reference solvers: the Random baseline and an exhaustive exact search for tiny instances."""

from __future__ import annotations

import itertools
import math
import statistics
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np

from msplace.errors import InfeasibleScenarioError, StateSpaceTooLargeError, UndefinedRoutingError
from msplace.model import Scenario
from msplace.solvers.placement import Placement, SolverContext
from msplace.solvers.result import SolverResult, finish

OPTIMAL_GUARD = 10**7


def solve_random(scenario: Scenario, trials: int = 100, seed: int = 0,
                 context: SolverContext | None = None) -> SolverResult:
    """Place each service's minimum instance count on uniformly drawn servers with room.

    `t_system` is the mean over feasible trials; `scheme` is the best trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    start = time.perf_counter()
    ctx = context if context is not None else SolverContext.build(scenario)
    rng = np.random.default_rng(seed)
    values: list[float] = []
    best: SolverResult | None = None
    for _ in range(trials):
        pl = Placement(ctx)
        stuck = False
        for j in range(scenario.n_services):
            for _ in range(ctx.required[j]):
                fits = [k for k in range(scenario.n_servers) if pl.room(k, j) >= 1]
                if not fits:
                    stuck = True
                    break
                pl.deploy(fits[int(rng.integers(len(fits)))], j, 1)
            if stuck:
                break
        if stuck:
            continue
        res = finish(ctx, pl.X, "random", 0.0)
        if not res.feasible:
            continue
        values.append(res.t_system)
        if best is None or res.t_system < best.t_system:
            best = res
    wall = (time.perf_counter() - start) * 1000.0
    if best is None:
        raise InfeasibleScenarioError(f"none of {trials} random trials was feasible")
    details = {
        "trials": trials,
        "seed": seed,
        "feasible_trials": len(values),
        "t_mean": statistics.fmean(values),
        "t_std": statistics.pstdev(values),
        "t_best": best.t_system,
    }
    return SolverResult(best.scheme, details["t_mean"], wall, "random", True, best.violations, details)


def _compositions(caps: tuple[int, ...], low: int, high: int):
    """Count vectors v with v[k] <= caps[k] and low <= sum(v) <= high, lexicographic."""
    for v in itertools.product(*(range(c + 1) for c in caps)):
        s = sum(v)
        if low <= s <= high:
            yield v


def exhaustive_optimal(scenario: Scenario, guard: int = OPTIMAL_GUARD,
                       context: SolverContext | None = None) -> SolverResult:
    """Globally optimal scheme by enumerating every feasible instance distribution.

    Services on a demanded chain range from their minimum count up to what server
    resources and the budget allow; services on no chain stay at zero instances,
    since extra instances of them cannot change the response time. Raises
    StateSpaceTooLargeError when the number of feasible schemes exceeds `guard`.
    """
    start = time.perf_counter()
    ctx = context if context is not None else SolverContext.build(scenario)
    n_srv, n_svc = scenario.n_servers, scenario.n_services
    r_s = scenario.r_s_exact
    caps0 = scenario.r_n_exact
    budget0 = Fraction(scenario.cost_model.max_cost) / Fraction(scenario.cost_model.unit_cost)
    involved = ctx.objective.involved

    def options(j: int, caps: tuple[Fraction, ...], budget: Fraction):
        low = ctx.required[j]
        if j not in involved:
            if low == 0:
                yield (0,) * n_srv
            return
        per = tuple(math.floor(c / r_s[j]) if c >= 0 else 0 for c in caps)
        high = math.floor(budget / r_s[j]) if budget >= 0 else -1
        yield from _compositions(per, low, high)

    def step(j: int, vec, caps, budget):
        used = sum(vec) * r_s[j]
        return tuple(c - v * r_s[j] for c, v in zip(caps, vec)), budget - used

    @lru_cache(maxsize=None)
    def count(j: int, caps: tuple[Fraction, ...], budget: Fraction) -> int:
        if j == n_svc:
            return 1
        total = 0
        for vec in options(j, caps, budget):
            total += count(j + 1, *step(j, vec, caps, budget))
            if total > guard:
                break
        return total

    states = count(0, caps0, budget0)
    count.cache_clear()
    if states > guard:
        raise StateSpaceTooLargeError(f"more than {guard} feasible schemes to enumerate")
    if states == 0:
        raise InfeasibleScenarioError("no scheme satisfies the resource, cost and capability constraints")

    X = np.zeros((n_srv, n_svc), dtype=np.int64)
    best_val, best_X = math.inf, None

    def search(j: int, caps, budget) -> None:
        nonlocal best_val, best_X
        if j == n_svc:
            try:
                val = ctx.objective.value(X)
            except UndefinedRoutingError:
                return
            if val < best_val:
                best_val, best_X = val, X.copy()
            return
        for vec in options(j, caps, budget):
            X[:, j] = vec
            search(j + 1, *step(j, vec, caps, budget))
        X[:, j] = 0

    search(0, caps0, budget0)
    wall = (time.perf_counter() - start) * 1000.0
    if best_X is None:
        raise InfeasibleScenarioError("no feasible scheme found")
    return finish(ctx, best_X, "optimal", wall, {"states": states})

