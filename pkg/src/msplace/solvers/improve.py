from __future__ import annotations

from collections.abc import Sequence
from fractions import Fraction

import numpy as np

from msplace.chains import FunctionChain
from msplace.evaluator import ABS_TOL, REL_TOL, as_matrix
from msplace.model import DeploymentScheme, Scenario
from msplace.solvers.placement import Placement, SolverContext


def improvement_pass(x: DeploymentScheme | np.ndarray, scenario: Scenario,
                     chains: Sequence[FunctionChain] | None = None, *,
                     context: SolverContext | None = None) -> DeploymentScheme | np.ndarray:
    """Add single instances while doing so lowers T(X) and resources and budget allow.

    Each round adds the (service, server) instance with the largest decrease of the
    average response time. Stops when no addition fits or none is a strict improvement.
    Expects a feasible input; feasibility is preserved because capability only grows.
    """
    ctx = context if context is not None else SolverContext.build(scenario, chains)
    pl = Placement(ctx, as_matrix(x, scenario))
    obj = ctx.objective
    unit_cost = Fraction(scenario.cost_model.unit_cost)
    budget = Fraction(scenario.cost_model.max_cost)
    r_s = scenario.r_s_exact
    used = sum((int(pl.X[k, i]) * r_s[i] for k in range(scenario.n_servers) for i in range(scenario.n_services)),
               Fraction(0))
    t_now = obj.value(pl.X)
    while True:
        best: tuple[float, int, int] | None = None
        for j in sorted(obj.involved):
            if unit_cost * (used + r_s[j]) > budget:
                continue
            fits = [k for k in range(scenario.n_servers) if pl.room(k, j) >= 1]
            if not fits:
                continue
            current = obj.service_terms(j, pl.X)
            cand = obj.candidate_terms(j, pl.X)
            for k in fits:
                gain = current - float(cand[k])
                if best is None or gain > best[0]:
                    best = (gain, j, k)
        if best is None or best[0] <= max(ABS_TOL, REL_TOL * t_now):
            break
        _, j, k = best
        pl.deploy(k, j, 1)
        t_new = obj.value(pl.X)
        if not t_new < t_now:  # float noise; never accept a non-decrease
            pl.X[k, j] -= 1
            break
        used += r_s[j]
        t_now = t_new

    if isinstance(x, DeploymentScheme):
        return DeploymentScheme.from_array(pl.X, scenario.server_ids, scenario.service_ids)
    return pl.X
