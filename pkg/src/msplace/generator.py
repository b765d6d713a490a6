"""Random scenario generator for benchmarking and property-based fuzzing.

Dependencies are grown chain by chain. Every function calls at most one other
function, and once a function has a successor every later chain that reaches it
follows the same path, so earlier chains act as patterns for new ones. New calls
are only added when they keep the service-level graph acyclic and no chain
longer than the configured maximum.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from msplace.chains import demand_summary
from msplace.errors import GeneratorConfigError
from msplace.evaluator import required_instances
from msplace.model import (
    CostModel,
    DemandEntry,
    DemandProfile,
    Dependency,
    DependencyGraph,
    FunctionSpec,
    NetworkModel,
    Scenario,
    ServerSpec,
    ServiceSpec,
)

_RANGE_FIELDS = ("functions_per_service", "data_size_kb", "service_ability", "service_resources", "chain_length",
                 "delay_ms", "bandwidth_mbps", "server_resources", "acfc")
_INT_RANGES = ("functions_per_service", "service_resources", "chain_length", "server_resources")


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    n_servers: int = 5
    n_services: int = 23
    n_user_requirements: int | None = None  # entry functions; default n_services // 3
    user_count: int = 1000
    rate_per_user: float = 1.0
    functions_per_service: tuple[int, int] = (1, 3)
    data_size_kb: tuple[float, float] = (0.0, 2000.0)
    service_ability: tuple[float, float] = (100.0, 400.0)
    service_resources: tuple[int, int] = (1, 3)
    chain_length: tuple[int, int] = (1, 7)
    delay_ms: tuple[float, float] = (1.0, 10.0)
    bandwidth_mbps: tuple[float, float] = (50.0, 1000.0)
    server_resources: tuple[int, int] = (20, 40)
    acfc: tuple[float, float] = (0.5, 1.5)
    unit_cost: float = 1.0
    max_cost: float | None = None  # default: cost of filling every server, never binding

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> GeneratorConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise GeneratorConfigError(f"unknown generator options: {sorted(unknown)}")
        values = dict(doc)
        for name in _RANGE_FIELDS:
            if name in values:
                rng = values[name]
                if not isinstance(rng, (list, tuple)) or len(rng) != 2:
                    raise GeneratorConfigError(f"{name}: expected a [low, high] pair")
                values[name] = tuple(rng)
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> GeneratorConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        for name in _RANGE_FIELDS:
            doc[name] = list(doc[name])
        return doc

    @property
    def entry_count(self) -> int:
        if self.n_user_requirements is not None:
            return self.n_user_requirements
        return max(1, self.n_services // 3)

    def validate(self) -> None:
        if self.n_servers < 1:
            raise GeneratorConfigError("n_servers must be >= 1")
        if self.n_services < 1:
            raise GeneratorConfigError("n_services must be >= 1")
        if self.entry_count < 1:
            raise GeneratorConfigError("n_user_requirements must be >= 1")
        if self.entry_count > self.n_services * self.functions_per_service[0]:
            raise GeneratorConfigError("n_user_requirements exceeds the guaranteed number of functions")
        if self.user_count < 0 or not self.rate_per_user > 0:
            raise GeneratorConfigError("user_count must be >= 0 and rate_per_user > 0")
        for name in _RANGE_FIELDS:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise GeneratorConfigError(f"{name}: low {lo} exceeds high {hi}")
            if name in _INT_RANGES and (int(lo) != lo or int(hi) != hi):
                raise GeneratorConfigError(f"{name}: bounds must be integers")
        if self.functions_per_service[0] < 1 or self.chain_length[0] < 1:
            raise GeneratorConfigError("functions_per_service and chain_length must start at >= 1")
        if self.data_size_kb[0] < 0 or self.delay_ms[0] < 0 or self.acfc[0] <= 0:
            raise GeneratorConfigError("data sizes and delays must be >= 0 and ACFC > 0")
        if (self.service_ability[0] <= 0 or self.service_resources[0] <= 0 or self.bandwidth_mbps[0] <= 0
                or self.server_resources[0] <= 0):
            raise GeneratorConfigError("abilities, resources and bandwidths must be positive")
        if not self.unit_cost > 0 or (self.max_cost is not None and not self.max_cost > 0):
            raise GeneratorConfigError("unit_cost and max_cost must be positive")


class _Dag:
    """Function successor map with the bookkeeping the chain grower needs."""

    def __init__(self, owner: dict[str, int], n_services: int):
        self.owner = owner
        self.succ: dict[str, str] = {}
        self.preds: dict[str, list[str]] = {}
        self.service_pred: list[set[int]] = [set() for _ in range(n_services)]

    def down_len(self, f: str) -> int:
        n = 1
        while f in self.succ:
            f = self.succ[f]
            n += 1
        return n

    def up_depth(self, f: str) -> int:
        ps = self.preds.get(f)
        return 1 if not ps else 1 + max(self.up_depth(p) for p in ps)

    def service_ancestors(self, target: int) -> set[int]:
        """Services with a call path to `target`, including `target` itself."""
        stack, seen = [target], {target}
        while stack:
            b = stack.pop()
            for a in self.service_pred[b]:
                if a not in seen:
                    seen.add(a)
                    stack.append(a)
        return seen

    def add(self, f: str, g: str) -> None:
        self.succ[f] = g
        self.preds.setdefault(g, []).append(f)
        self.service_pred[self.owner[g]].add(self.owner[f])


def _uniform(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    return float(rng.uniform(bounds[0], bounds[1]))


def _integer(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    return int(rng.integers(int(bounds[0]), int(bounds[1]) + 1))


def generate_scenario(config: GeneratorConfig) -> Scenario:
    """Draw a random scenario; identical configs (including seed) give identical scenarios."""
    config.validate()
    rng = np.random.default_rng(config.seed)

    services = []
    for i in range(config.n_services):
        funcs = tuple(
            FunctionSpec(f"s{i}.f{k}", _uniform(rng, config.data_size_kb), _uniform(rng, config.data_size_kb))
            for k in range(_integer(rng, config.functions_per_service))
        )
        services.append(ServiceSpec(f"s{i}", funcs, _uniform(rng, config.service_ability),
                                    float(_integer(rng, config.service_resources))))
    function_ids = [f.id for s in services for f in s.functions]
    owner = {f.id: i for i, s in enumerate(services) for f in s.functions}

    servers = tuple(ServerSpec(f"n{k}", float(_integer(rng, config.server_resources)))
                    for k in range(config.n_servers))
    n = config.n_servers
    delay = [[0.0] * n for _ in range(n)]
    bandwidth: list[list[float | None]] = [[None] * n for _ in range(n)]
    for v in range(n):
        for w in range(v + 1, n):
            delay[v][w] = delay[w][v] = _uniform(rng, config.delay_ms)
            bandwidth[v][w] = bandwidth[w][v] = _uniform(rng, config.bandwidth_mbps)

    entries = [function_ids[int(i)] for i in rng.choice(len(function_ids), size=config.entry_count, replace=False)]
    max_len = int(config.chain_length[1])
    dag = _Dag(owner, config.n_services)
    closed: set[str] = set()
    edges: list[Dependency] = []
    for entry in entries:
        target = _integer(rng, config.chain_length)
        cur, length = entry, 1
        while True:
            if cur in dag.succ:  # follow the pattern laid down by earlier chains
                cur = dag.succ[cur]
                length += 1
                continue
            if cur in closed or length >= target:
                closed.add(cur)
                break
            # a callee whose service already reaches ours would close a service-level cycle
            blocked = dag.service_ancestors(owner[cur])
            room = max_len - dag.up_depth(cur)
            candidates = [g for g in function_ids if owner[g] not in blocked and dag.down_len(g) <= room]
            if not candidates:
                closed.add(cur)
                break
            g = candidates[int(rng.integers(len(candidates)))]
            dag.add(cur, g)
            edges.append(Dependency(cur, g, _uniform(rng, config.acfc)))
            cur = g
            length += 1

    total_rate = config.user_count * config.rate_per_user
    shares = 1.0 - rng.random(len(entries))
    shares = shares / shares.sum()
    by_entry: dict[str, list[float]] = {}
    for entry, share in zip(entries, shares):
        spread = 1.0 - rng.random(n)
        spread = spread / spread.sum()
        by_entry[entry] = [float(total_rate * share * p) for p in spread]
    demand = tuple(DemandEntry(f, servers[k].id, by_entry[f][k])
                   for f in function_ids if f in by_entry for k in range(n))

    capacity = math.fsum(s.r_n for s in servers)
    max_cost = config.max_cost if config.max_cost is not None else config.unit_cost * capacity
    scenario = Scenario(
        tuple(services),
        DependencyGraph(tuple(function_ids), tuple(edges)),
        servers,
        NetworkModel(tuple(map(tuple, delay)), tuple(map(tuple, bandwidth))),
        DemandProfile(demand),
        CostModel(float(config.unit_cost), float(max_cost)),
        seed=config.seed,
    )
    _check_feasible(scenario)
    return scenario


def _check_feasible(scenario: Scenario) -> None:
    """Reject scenarios whose minimum deployment cannot fit, instead of patching them."""
    required = required_instances(scenario, demand_summary(scenario))
    need = math.fsum(required[s.id] * s.r_s for s in scenario.services)
    capacity = math.fsum(n.r_n for n in scenario.servers)
    if need > capacity:
        raise GeneratorConfigError(
            f"minimum deployment needs {need:g} resource units but servers provide only {capacity:g}")
    if scenario.cost_model.unit_cost * need > scenario.cost_model.max_cost:
        raise GeneratorConfigError("minimum deployment exceeds max_cost")
    largest = max(n.r_n for n in scenario.servers)
    for s in scenario.services:
        if required[s.id] > 0 and s.r_s > largest:
            raise GeneratorConfigError(f"service {s.id} needs {s.r_s:g} units, more than any server has")
