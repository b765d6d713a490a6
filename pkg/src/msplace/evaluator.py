"""Average response time under Round-Robin routing, and constraint checks.

Two independent routes compute the same objective:

* ``qsrfp``: per chain, sum over consecutive positions of the expected hop time
  under the product of the two instance distributions (a quadratic fraction in X);
* ``fpp``: enumerate every response server path of a chain with its probability.

Their agreement is the central correctness property of the package.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from msplace.chains import DemandSummary, FunctionChain, build_chains, demand_summary
from msplace.errors import DimensionMismatchError, EnumerationTooLargeError, UndefinedRoutingError
from msplace.model import DeploymentScheme, FunctionSpec, NetworkModel, Scenario

REL_TOL = 1e-9
ABS_TOL = 1e-12
FPP_GUARD = 10**7


def isclose(a: float, b: float) -> bool:
    """Package-wide float equality: relative 1e-9 with an absolute floor of 1e-12."""
    return abs(a - b) <= max(ABS_TOL, REL_TOL * max(abs(a), abs(b)))


@dataclass(frozen=True)
class ResponsePath:
    """One server per chain position, its selection probability, and the in-chain time.

    ``time_ms`` excludes the user-to-first-server hop, which depends on the origin.
    """

    servers: tuple[int, ...]
    probability: float
    time_ms: float


@dataclass(frozen=True)
class Violation:
    constraint: str  # "resource" | "cost" | "capability"
    entity: str
    margin: float

    def to_dict(self) -> dict:
        return {"constraint": self.constraint, "entity": self.entity, "margin": self.margin}


@dataclass(frozen=True)
class EvaluationReport:
    t_system: float
    t_per_function: dict[str, float]
    constraints_ok: bool
    violations: tuple[Violation, ...]
    mode: str = "qsrfp"
    zero_demand: bool = False

    def to_dict(self) -> dict:
        return {
            "t_system_ms": self.t_system,
            "per_function": dict(self.t_per_function),
            "constraints_ok": self.constraints_ok,
            "violations": [v.to_dict() for v in self.violations],
            "mode": self.mode,
            "zero_demand": self.zero_demand,
        }


# -- helpers -----------------------------------------------------------------


def as_matrix(x: DeploymentScheme | np.ndarray, scenario: Scenario) -> np.ndarray:
    """Return the [server][service] count matrix, checking it against the scenario."""
    if isinstance(x, DeploymentScheme):
        x.check_against(scenario)
        return x.as_array()
    arr = np.asarray(x)
    if arr.shape != (scenario.n_servers, scenario.n_services):
        raise DimensionMismatchError(
            f"scheme shape {arr.shape} != ({scenario.n_servers}, {scenario.n_services})")
    return arr


def _distribution(X: np.ndarray, j: int, scenario: Scenario) -> np.ndarray:
    col = X[:, j].astype(float)
    total = col.sum()
    if total <= 0:
        raise UndefinedRoutingError(scenario.service_ids[j])
    return col / total


def _origin(scenario: Scenario, function: str) -> np.ndarray | None:
    rates = scenario.demand_by_function.get(function)
    if rates is None:
        return None
    total = rates.sum()
    return None if total <= 0 else rates / total


def _hop_data(scenario: Scenario, chain: FunctionChain, m: int) -> float:
    """Data moved when position m is called (0 for a virtual hop)."""
    if m > 0 and chain.virtual_flags[m - 1]:
        return 0.0
    return scenario.functions[chain.hops[m]].data


def _hop_matrix(scenario: Scenario, data: float) -> np.ndarray:
    return data * scenario.inv_bandwidth_array + scenario.delay_array


# -- primitives --------------------------------------------------------------


def pair_transmission_time(callee: FunctionSpec | float, from_server: int, to_server: int,
                           network: NetworkModel) -> float:
    """Delay plus transfer time (ms) of one call; zero when both ends share a server.

    `callee` is the called function, or directly its total data size in KB.
    KB / (MB/s) is exactly ms.
    """
    if from_server == to_server:
        return 0.0
    data = callee if isinstance(callee, (int, float)) else callee.d_in + callee.d_out
    return data / network.bandwidth[from_server][to_server] + network.delay[from_server][to_server]


def instance_probability(service: str, server: str, x: DeploymentScheme) -> float:
    """Round-Robin share of `service` requests handled on `server`."""
    total = x.total(service)
    if total <= 0:
        raise UndefinedRoutingError(service)
    return x.count(server, service) / total


# -- per-chain evaluation ----------------------------------------------------


def chain_average_time_qsrfp(chain: FunctionChain, x: DeploymentScheme | np.ndarray, scenario: Scenario) -> float:
    """Expected response time of one chain as a sum of per-hop quadratic fractions."""
    X = as_matrix(x, scenario)
    dists = [_distribution(X, scenario.owner[f], scenario) for f in chain.hops]
    origin = _origin(scenario, chain.entry)
    total = 0.0
    if origin is not None:
        total += float(origin @ _hop_matrix(scenario, _hop_data(scenario, chain, 0)) @ dists[0])
    for m in range(1, len(chain.hops)):
        total += float(dists[m - 1] @ _hop_matrix(scenario, _hop_data(scenario, chain, m)) @ dists[m])
    return total


def enumerate_response_paths(chain: FunctionChain, x: DeploymentScheme | np.ndarray, scenario: Scenario,
                             guard: int = FPP_GUARD) -> Iterator[ResponsePath]:
    """Yield every response server path of the chain with its probability and in-chain time."""
    X = as_matrix(x, scenario)
    n, length = scenario.n_servers, len(chain.hops)
    if n ** length > guard:
        raise EnumerationTooLargeError(f"{n}^{length} response paths exceed the guard of {guard}")
    owners = [scenario.owner[f] for f in chain.hops]
    totals = []
    for j in owners:
        t = int(X[:, j].sum())
        if t <= 0:
            raise UndefinedRoutingError(scenario.service_ids[j])
        totals.append(t)
    data = [_hop_data(scenario, chain, m) for m in range(length)]
    network = scenario.network
    for path in itertools.product(range(n), repeat=length):
        prob = 1.0
        for m, server in enumerate(path):
            prob *= X[server, owners[m]] / totals[m]
        t = 0.0
        for m in range(1, length):
            t += pair_transmission_time(data[m], path[m - 1], path[m], network)
        yield ResponsePath(path, prob, t)


def chain_average_time_fpp(chain: FunctionChain, x: DeploymentScheme | np.ndarray, scenario: Scenario,
                           guard: int = FPP_GUARD) -> float:
    """Expected response time of one chain by exhaustive path enumeration."""
    X = as_matrix(x, scenario)
    rates = scenario.demand_by_function.get(chain.entry)
    rate_total = 0.0 if rates is None else float(sum(rates.tolist()))
    entry_data = _hop_data(scenario, chain, 0)
    network = scenario.network
    total = 0.0
    for path in enumerate_response_paths(chain, X, scenario, guard):
        if path.probability == 0.0:
            continue
        if rate_total <= 0:
            # no user origin: only the in-chain part is defined
            total += path.probability * path.time_ms
            continue
        for k in range(scenario.n_servers):
            if rates[k] == 0:
                continue
            access = pair_transmission_time(entry_data, k, path.servers[0], network)
            total += (rates[k] / rate_total) * path.probability * (path.time_ms + access)
    return total


# -- system level ------------------------------------------------------------


def _chain_weights(scenario: Scenario, chains: Sequence[FunctionChain]) -> tuple[list[float], float]:
    totals = [scenario.total_demand(c.entry) for c in chains]
    grand = math.fsum(totals)
    return totals, grand


def system_average_time(x: DeploymentScheme | np.ndarray, scenario: Scenario,
                        chains: Sequence[FunctionChain] | None = None, mode: str = "qsrfp",
                        guard: int = FPP_GUARD, summary: DemandSummary | None = None) -> EvaluationReport:
    """Demand-weighted mean response time of all requested functions, plus constraint status."""
    if mode not in ("qsrfp", "fpp"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    X = as_matrix(x, scenario)
    if chains is None:
        chains = build_chains(scenario)
    totals, grand = _chain_weights(scenario, chains)
    per_function: dict[str, float] = {}
    t_system = 0.0
    if grand > 0:
        for chain, rate in zip(chains, totals):
            if rate <= 0:
                continue
            if mode == "qsrfp":
                t = chain_average_time_qsrfp(chain, X, scenario)
            else:
                t = chain_average_time_fpp(chain, X, scenario, guard)
            per_function[chain.entry] = t
            t_system += (rate / grand) * t
    if summary is None:
        summary = demand_summary(scenario, chains)
    violations = tuple(check_constraints(X, scenario, summary))
    return EvaluationReport(t_system, per_function, not violations, violations, mode, zero_demand=grand <= 0)


def required_instances(scenario: Scenario, summary: DemandSummary) -> dict[str, int]:
    """Smallest instance count per service meeting the capability constraint exactly."""
    return {s.id: math.ceil(summary.total(s.id) / mu) for s, mu in zip(scenario.services, scenario.mu_exact)}


def check_constraints(x: DeploymentScheme | np.ndarray, scenario: Scenario,
                      summary: DemandSummary | None = None) -> list[Violation]:
    """Resource, cost and capability violations of a scheme, in exact arithmetic."""
    X = as_matrix(x, scenario)
    if summary is None:
        summary = demand_summary(scenario)
    r_s = scenario.r_s_exact
    out: list[Violation] = []
    used_total = Fraction(0)
    for k, server in enumerate(scenario.servers):
        used = sum((int(X[k, i]) * r_s[i] for i in np.flatnonzero(X[k])), Fraction(0))
        used_total += used
        cap = scenario.r_n_exact[k]
        if used > cap:
            out.append(Violation("resource", server.id, float(used - cap)))
    cost = Fraction(scenario.cost_model.unit_cost) * used_total
    budget = Fraction(scenario.cost_model.max_cost)
    if cost > budget:
        out.append(Violation("cost", "system", float(cost - budget)))
    for i, service in enumerate(scenario.services):
        capability = scenario.mu_exact[i] * int(X[:, i].sum())
        need = summary.total(service.id)
        if capability < need:
            out.append(Violation("capability", service.id, float(need - capability)))
    return out


# -- aggregated objective ----------------------------------------------------


@dataclass
class Objective:
    """T(X) regrouped by service pair, for fast incremental scoring.

    T(X) = sum_j u_j . p_j + sum_(a,b) p_a^T M_ab p_b, where p_j is the instance
    distribution of service j and the matrices already carry demand weights.
    A service with no instance contributes a zero distribution, which is how the
    constructive solvers score partial schemes.
    """

    scenario: Scenario
    chains: tuple[FunctionChain, ...]
    user_vec: dict[int, np.ndarray] = field(default_factory=dict)
    pair: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    incoming: dict[int, list[tuple[int, np.ndarray]]] = field(default_factory=dict)
    outgoing: dict[int, list[tuple[int, np.ndarray]]] = field(default_factory=dict)
    involved: frozenset[int] = frozenset()

    @classmethod
    def build(cls, scenario: Scenario, chains: Iterable[FunctionChain] | None = None) -> Objective:
        chains = tuple(build_chains(scenario) if chains is None else chains)
        obj = cls(scenario, chains)
        totals, grand = _chain_weights(scenario, chains)
        involved: set[int] = set()
        if grand > 0:
            for chain, rate in zip(chains, totals):
                if rate <= 0:
                    continue
                w = rate / grand
                owners = [scenario.owner[f] for f in chain.hops]
                involved.update(owners)
                origin = _origin(scenario, chain.entry)
                t0 = _hop_matrix(scenario, _hop_data(scenario, chain, 0))
                vec = obj.user_vec.setdefault(owners[0], np.zeros(scenario.n_servers))
                vec += w * (t0.T @ origin)
                for m in range(1, len(owners)):
                    key = (owners[m - 1], owners[m])
                    mat = obj.pair.setdefault(key, np.zeros((scenario.n_servers, scenario.n_servers)))
                    mat += w * _hop_matrix(scenario, _hop_data(scenario, chain, m))
        for (a, b), mat in obj.pair.items():
            if a != b:
                obj.outgoing.setdefault(a, []).append((b, mat))
                obj.incoming.setdefault(b, []).append((a, mat))
        obj.involved = frozenset(involved)
        return obj

    def neighbors(self, j: int) -> list[int]:
        """Services adjacent to j in some chain (excluding j itself), ascending."""
        out = {b for b, _ in self.outgoing.get(j, ())} | {a for a, _ in self.incoming.get(j, ())}
        return sorted(out)

    @staticmethod
    def _dist(col: np.ndarray) -> np.ndarray:
        total = col.sum()
        return col / total if total > 0 else np.zeros_like(col, dtype=float)

    def _linear(self, j: int, X: np.ndarray) -> np.ndarray:
        g = self.user_vec.get(j)
        g = np.zeros(self.scenario.n_servers) if g is None else g.copy()
        for a, mat in self.incoming.get(j, ()):
            col = X[:, a]
            if col.any():
                g += mat.T @ self._dist(col.astype(float))
        for b, mat in self.outgoing.get(j, ()):
            col = X[:, b]
            if col.any():
                g += mat @ self._dist(col.astype(float))
        return g

    def service_terms(self, j: int, X: np.ndarray) -> float:
        """Part of T(X) that depends on service j's distribution (0 if undeployed)."""
        col = X[:, j].astype(float)
        if not col.any():
            return 0.0
        p = col / col.sum()
        value = float(self._linear(j, X) @ p)
        quad = self.pair.get((j, j))
        if quad is not None:
            value += float(p @ quad @ p)
        return value

    def candidate_terms(self, j: int, X: np.ndarray) -> np.ndarray:
        """service_terms(j) after adding one instance of j on each server in turn."""
        x = X[:, j].astype(float)
        s1 = x.sum() + 1.0
        g = self._linear(j, X)
        scores = (g @ x + g) / s1
        quad = self.pair.get((j, j))
        if quad is not None:
            scores = scores + (x @ quad @ x + quad @ x + quad.T @ x + np.diag(quad)) / (s1 * s1)
        return scores

    def value(self, X: np.ndarray) -> float:
        """T(X); raises UndefinedRoutingError if a service on a demanded chain is undeployed."""
        dists: dict[int, np.ndarray] = {}
        for j in sorted(self.involved):
            dists[j] = _distribution(X, j, self.scenario)
        total = 0.0
        for j, vec in self.user_vec.items():
            total += float(vec @ dists[j])
        for (a, b), mat in self.pair.items():
            total += float(dists[a] @ mat @ dists[b])
        return total
