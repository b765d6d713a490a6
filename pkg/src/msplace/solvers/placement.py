"""Working deployment state shared by the constructive solvers.

`Placement` owns a mutable [server][service] matrix plus exact free-resource
bookkeeping, and implements the two building blocks of the greedy algorithms:
choosing the best server for one more instance of a service, and deploying k
instances while re-placing the neighbours that the new instances attract.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from msplace.chains import DemandSummary, FunctionChain, build_chains, demand_summary
from msplace.errors import InsufficientCapacityError
from msplace.evaluator import Objective, as_matrix, required_instances
from msplace.model import DeploymentScheme, Scenario


@dataclass
class SolverContext:
    """Per-scenario data every solver needs; built once and reused."""

    scenario: Scenario
    chains: tuple[FunctionChain, ...]
    summary: DemandSummary
    objective: Objective
    required: list[int]

    @classmethod
    def build(cls, scenario: Scenario, chains: Sequence[FunctionChain] | None = None) -> SolverContext:
        chains = tuple(build_chains(scenario) if chains is None else chains)
        summary = demand_summary(scenario, chains)
        req = required_instances(scenario, summary)
        return cls(scenario, chains, summary, Objective.build(scenario, chains),
                   [req[sid] for sid in scenario.service_ids])


class Placement:
    def __init__(self, ctx: SolverContext, X: np.ndarray | None = None):
        self.ctx = ctx
        scenario = ctx.scenario
        if X is None:
            X = np.zeros((scenario.n_servers, scenario.n_services), dtype=np.int64)
        self.X = np.array(X, dtype=np.int64)
        self._r_s = scenario.r_s_exact
        self.free = [cap - sum((int(self.X[k, i]) * self._r_s[i] for i in np.flatnonzero(self.X[k])), Fraction(0))
                     for k, cap in enumerate(scenario.r_n_exact)]

    def room(self, k: int, j: int) -> int:
        """How many more instances of service j fit on server k."""
        return max(0, math.floor(self.free[k] // self._r_s[j]))

    def inst(self, j: int) -> int:
        return int(self.X[:, j].sum())

    def deploy(self, k: int, j: int, count: int) -> None:
        self.X[k, j] += count
        self.free[k] -= count * self._r_s[j]

    def remove_all(self, j: int) -> None:
        for k in range(self.X.shape[0]):
            c = int(self.X[k, j])
            if c:
                self.free[k] += c * self._r_s[j]
        self.X[:, j] = 0

    def best_server(self, j: int) -> int | None:
        """Server with room for service j minimizing the response time of j's hops.

        Only hops between j and its chain neighbours (and the user access hop, if j
        is an entry) depend on where j's new instance goes; undeployed neighbours
        contribute nothing. Ties go to the lowest server index.
        """
        fits = [k for k in range(self.X.shape[0]) if self.room(k, j) >= 1]
        if not fits:
            return None
        if j not in self.ctx.objective.involved:
            return fits[0]
        scores = self.ctx.objective.candidate_terms(j, self.X)
        best, best_score = None, math.inf
        for k in fits:
            if scores[k] < best_score:
                best, best_score = k, scores[k]
        return best

    def _place(self, j: int, count: int) -> None:
        """Place `count` instances of j, batching as many per chosen server as fit."""
        service_id = self.ctx.scenario.service_ids[j]
        while count > 0:
            k = self.best_server(j)
            if k is None:
                raise InsufficientCapacityError(service_id)
            c = min(self.room(k, j), count)
            self.deploy(k, j, c)
            count -= c

    def deploy_spread(self, j: int, k: int) -> None:
        """Deploy k instances of service j, then ripple re-placements through its neighbours."""
        neighbors = self.ctx.objective.neighbors
        service_id = self.ctx.scenario.service_ids[j]
        while k > 0:
            n = self.best_server(j)
            if n is None:
                raise InsufficientCapacityError(service_id)
            c = min(self.room(n, j), k)
            self.deploy(n, j, c)
            k -= c

            pending = set(neighbors(j))
            processed = {j}
            while pending:
                r = min(pending)
                pending.discard(r)
                k_r = self.inst(r)
                if k_r == 0:
                    continue
                snapshot = self.X.copy()
                self.remove_all(r)
                self._place(r, k_r)
                if not np.array_equal(self.X, snapshot):
                    pending |= set(neighbors(r))
                    processed.add(r)
                    pending -= processed


# -- public wrappers ---------------------------------------------------------


def _context(scenario: Scenario, chains, context: SolverContext | None) -> SolverContext:
    return context if context is not None else SolverContext.build(scenario, chains)


def best_server(service: str, x: DeploymentScheme | np.ndarray, scenario: Scenario,
                chains: Sequence[FunctionChain] | None = None, *, context: SolverContext | None = None) -> str | None:
    """Id of the best server for one more instance of `service`, or None if nothing fits."""
    ctx = _context(scenario, chains, context)
    pl = Placement(ctx, as_matrix(x, scenario))
    k = pl.best_server(scenario.service_index[service])
    return None if k is None else scenario.server_ids[k]


def deploy_spread(service: str, k: int, x: DeploymentScheme | np.ndarray, scenario: Scenario,
                  chains: Sequence[FunctionChain] | None = None, *,
                  context: SolverContext | None = None) -> DeploymentScheme | np.ndarray:
    """Return a copy of `x` with k more instances of `service` placed and neighbours re-placed."""
    if k < 1:
        raise ValueError("deploy_spread needs k >= 1")
    ctx = _context(scenario, chains, context)
    pl = Placement(ctx, as_matrix(x, scenario))
    pl.deploy_spread(scenario.service_index[service], k)
    if isinstance(x, DeploymentScheme):
        return DeploymentScheme.from_array(pl.X, scenario.server_ids, scenario.service_ids)
    return pl.X
