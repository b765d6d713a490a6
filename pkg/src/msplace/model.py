"""Domain types for a placement problem instance and the scenario file format.

All types are frozen dataclasses holding tuples, so a `Scenario` is hashable,
comparable, and safe to share. Numeric views used by the evaluator are derived
lazily and cached on the instance.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from msplace.errors import DimensionMismatchError, ScenarioFormatError

#: Pseudo-function standing for the users in the dependency graph.
USER = "USER"

#: Bandwidth value on the diagonal of the network matrix (same-server transfer).
INTRA = None


@dataclass(frozen=True)
class FunctionSpec:
    id: str
    d_in: float  # KB
    d_out: float  # KB

    @property
    def data(self) -> float:
        return self.d_in + self.d_out


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    functions: tuple[FunctionSpec, ...]
    mu: float  # requests per unit time per instance
    r_s: float  # resource units per instance


@dataclass(frozen=True)
class Dependency:
    caller: str
    callee: str
    acfc: float


@dataclass(frozen=True)
class DependencyGraph:
    """Function call DAG. `functions` lists every declared node except USER."""

    functions: tuple[str, ...]
    edges: tuple[Dependency, ...]

    @cached_property
    def _adjacency(self) -> dict[str, list[Dependency]]:
        adj: dict[str, list[Dependency]] = {}
        for e in self.edges:
            adj.setdefault(e.caller, []).append(e)
        return adj

    def out_edges(self, function: str) -> list[Dependency]:
        return self._adjacency.get(function, [])

    def has_node(self, function: str) -> bool:
        return function == USER or function in self._nodes

    @cached_property
    def _nodes(self) -> frozenset[str]:
        return frozenset(self.functions)

    def find_cycle(self) -> list[str] | None:
        """Return one dependency cycle as a node list (first node repeated), or None."""
        color: dict[str, int] = {}
        stack_path: list[str] = []

        nodes = [USER, *self.functions]
        nodes.extend(sorted(({e.caller for e in self.edges} | {e.callee for e in self.edges}) - set(nodes)))
        for root in nodes:
            if color.get(root):
                continue
            # iterative DFS; frames hold (node, iterator over successors)
            color[root] = 1
            stack_path.append(root)
            frames = [(root, iter(self.out_edges(root)))]
            while frames:
                node, it = frames[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = 2
                    stack_path.pop()
                    frames.pop()
                    continue
                child = nxt.callee
                state = color.get(child, 0)
                if state == 1:
                    start = stack_path.index(child)
                    return stack_path[start:] + [child]
                if state == 0:
                    color[child] = 1
                    stack_path.append(child)
                    frames.append((child, iter(self.out_edges(child))))
        return None


@dataclass(frozen=True)
class ServerSpec:
    id: str
    r_n: float


@dataclass(frozen=True)
class NetworkModel:
    """Effective one-way delay (ms) and bandwidth (MB/s) between servers.

    The diagonal of `bandwidth` holds INTRA (None): same-server calls cost nothing.
    """

    delay: tuple[tuple[float, ...], ...]
    bandwidth: tuple[tuple[float | None, ...], ...]


@dataclass(frozen=True)
class DemandEntry:
    function: str
    server: str
    rate: float


@dataclass(frozen=True)
class DemandProfile:
    entries: tuple[DemandEntry, ...]

    def rate(self, function: str, server: str) -> float:
        return sum(e.rate for e in self.entries if e.function == function and e.server == server)


@dataclass(frozen=True)
class CostModel:
    unit_cost: float
    max_cost: float


@dataclass(frozen=True)
class Scenario:
    services: tuple[ServiceSpec, ...]
    dependency_graph: DependencyGraph
    servers: tuple[ServerSpec, ...]
    network: NetworkModel
    demand: DemandProfile
    cost_model: CostModel
    seed: int | None = field(default=None, compare=True)

    # -- lookups -----------------------------------------------------------

    @cached_property
    def service_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.services)

    @cached_property
    def server_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.servers)

    @cached_property
    def function_ids(self) -> tuple[str, ...]:
        return tuple(f.id for s in self.services for f in s.functions)

    @cached_property
    def service_index(self) -> dict[str, int]:
        return {sid: i for i, sid in enumerate(self.service_ids)}

    @cached_property
    def server_index(self) -> dict[str, int]:
        return {nid: i for i, nid in enumerate(self.server_ids)}

    @cached_property
    def functions(self) -> dict[str, FunctionSpec]:
        return {f.id: f for s in self.services for f in s.functions}

    @cached_property
    def owner(self) -> dict[str, int]:
        """Function id -> index of the service that offers it."""
        return {f.id: i for i, s in enumerate(self.services) for f in s.functions}

    @property
    def n_servers(self) -> int:
        return len(self.servers)

    @property
    def n_services(self) -> int:
        return len(self.services)

    # -- numeric views -----------------------------------------------------

    @cached_property
    def delay_array(self) -> np.ndarray:
        d = np.array(self.network.delay, dtype=float)
        np.fill_diagonal(d, 0.0)
        return d

    @cached_property
    def inv_bandwidth_array(self) -> np.ndarray:
        n = self.n_servers
        inv = np.zeros((n, n))
        for v, row in enumerate(self.network.bandwidth):
            for w, b in enumerate(row):
                if v != w:
                    inv[v, w] = 1.0 / b
        return inv

    @cached_property
    def demand_by_function(self) -> dict[str, np.ndarray]:
        """Per-server user request rates, for functions that appear in the demand list."""
        out: dict[str, np.ndarray] = {}
        for e in self.demand.entries:
            vec = out.setdefault(e.function, np.zeros(self.n_servers))
            vec[self.server_index[e.server]] += e.rate
        return out

    def total_demand(self, function: str) -> float:
        vec = self.demand_by_function.get(function)
        return 0.0 if vec is None else float(sum(vec.tolist()))

    @cached_property
    def mu_array(self) -> np.ndarray:
        return np.array([s.mu for s in self.services], dtype=float)

    @cached_property
    def r_s_array(self) -> np.ndarray:
        return np.array([s.r_s for s in self.services], dtype=float)

    @cached_property
    def r_n_array(self) -> np.ndarray:
        return np.array([n.r_n for n in self.servers], dtype=float)

    # exact values for constraint arithmetic; floats convert to fractions losslessly

    @cached_property
    def mu_exact(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(s.mu) for s in self.services)

    @cached_property
    def r_s_exact(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(s.r_s) for s in self.services)

    @cached_property
    def r_n_exact(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(n.r_n) for n in self.servers)


@dataclass(frozen=True)
class DeploymentScheme:
    """Instance counts indexed [server][service]."""

    servers: tuple[str, ...]
    services: tuple[str, ...]
    x: tuple[tuple[int, ...], ...]

    @classmethod
    def from_array(cls, arr: np.ndarray | Iterable[Iterable[int]], servers: Iterable[str],
                   services: Iterable[str]) -> DeploymentScheme:
        rows = tuple(tuple(int(v) for v in row) for row in arr)
        return cls(tuple(servers), tuple(services), rows)

    @classmethod
    def empty(cls, scenario: Scenario) -> DeploymentScheme:
        zeros = np.zeros((scenario.n_servers, scenario.n_services), dtype=np.int64)
        return cls.from_array(zeros, scenario.server_ids, scenario.service_ids)

    def as_array(self) -> np.ndarray:
        arr = np.array(self.x, dtype=np.int64)
        return arr.reshape(len(self.servers), len(self.services))

    def count(self, server: str, service: str) -> int:
        return self.x[self.servers.index(server)][self.services.index(service)]

    def total(self, service: str) -> int:
        j = self.services.index(service)
        return sum(row[j] for row in self.x)

    def check_against(self, scenario: Scenario) -> None:
        if self.servers != scenario.server_ids:
            raise DimensionMismatchError(
                f"scheme servers {list(self.servers)} do not match scenario servers {list(scenario.server_ids)}")
        if self.services != scenario.service_ids:
            raise DimensionMismatchError(
                f"scheme services {list(self.services)} do not match scenario services {list(scenario.service_ids)}")
        if len(self.x) != len(self.servers) or any(len(row) != len(self.services) for row in self.x):
            raise DimensionMismatchError("scheme matrix shape does not match its server/service lists")
        if any(v < 0 for row in self.x for v in row):
            raise DimensionMismatchError("scheme contains negative instance counts")


# -- validation ------------------------------------------------------------


def _finite(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def validate_scenario(scenario: Scenario) -> list[str]:
    """Return a list of human-readable invariant violations (empty when valid)."""
    errors: list[str] = []

    if not scenario.services:
        errors.append("services: at least one service is required")
    if not scenario.servers:
        errors.append("servers: at least one server is required")

    seen_services: set[str] = set()
    seen_functions: set[str] = set()
    for s in scenario.services:
        if s.id in seen_services:
            errors.append(f"service {s.id}: duplicate service id")
        seen_services.add(s.id)
        if not s.functions:
            errors.append(f"service {s.id}: functions must be non-empty")
        if not (_finite(s.mu) and s.mu > 0):
            errors.append(f"service {s.id}: mu must be positive")
        if not (_finite(s.r_s) and s.r_s > 0):
            errors.append(f"service {s.id}: r_s must be positive")
        for f in s.functions:
            if f.id == USER:
                errors.append(f"function {f.id}: id is reserved for the user node")
            if f.id in seen_functions:
                errors.append(f"function {f.id}: duplicate function id")
            seen_functions.add(f.id)
            if not (_finite(f.d_in) and f.d_in >= 0):
                errors.append(f"function {f.id}: d_in must be non-negative")
            if not (_finite(f.d_out) and f.d_out >= 0):
                errors.append(f"function {f.id}: d_out must be non-negative")

    graph = scenario.dependency_graph
    if set(graph.functions) != seen_functions or len(graph.functions) != len(set(graph.functions)):
        errors.append("dependency graph: node set does not match the declared functions")
    seen_edges: set[tuple[str, str]] = set()
    for e in graph.edges:
        if e.caller != USER and e.caller not in seen_functions:
            errors.append(f"dependency {e.caller}->{e.callee}: unknown caller {e.caller}")
        if e.callee == USER:
            errors.append(f"dependency {e.caller}->{e.callee}: USER cannot be called")
        elif e.callee not in seen_functions:
            errors.append(f"dependency {e.caller}->{e.callee}: unknown callee {e.callee}")
        if not (_finite(e.acfc) and e.acfc >= 0):
            errors.append(f"dependency {e.caller}->{e.callee}: acfc must be non-negative")
        if (e.caller, e.callee) in seen_edges:
            errors.append(f"dependency {e.caller}->{e.callee}: duplicate edge")
        seen_edges.add((e.caller, e.callee))
    cycle = graph.find_cycle()
    if cycle is not None:
        errors.append("dependency graph cyclic: " + " -> ".join(cycle))

    seen_servers: set[str] = set()
    for n in scenario.servers:
        if n.id in seen_servers:
            errors.append(f"server {n.id}: duplicate server id")
        seen_servers.add(n.id)
        if not (_finite(n.r_n) and n.r_n > 0):
            errors.append(f"server {n.id}: r_n must be positive")

    size = len(scenario.servers)
    delay, bandwidth = scenario.network.delay, scenario.network.bandwidth
    if len(delay) != size or any(len(row) != size for row in delay):
        errors.append(f"network.delay: expected a {size}x{size} matrix")
    else:
        for v, row in enumerate(delay):
            for w, d in enumerate(row):
                if v == w:
                    if d != 0:
                        errors.append(f"network.delay[{v}][{v}]: self-delay must be zero")
                elif not (_finite(d) and d >= 0):
                    errors.append(f"network.delay[{v}][{w}]: delay must be non-negative")
    if len(bandwidth) != size or any(len(row) != size for row in bandwidth):
        errors.append(f"network.bandwidth: expected a {size}x{size} matrix")
    else:
        for v, row in enumerate(bandwidth):
            for w, b in enumerate(row):
                if v == w:
                    if b is not INTRA:
                        errors.append(f"network.bandwidth[{v}][{v}]: self-bandwidth must be INTRA (null)")
                elif not (_finite(b) and b > 0):
                    errors.append(f"network.bandwidth[{v}][{w}]: bandwidth must be positive")

    seen_demand: set[tuple[str, str]] = set()
    for e in scenario.demand.entries:
        if e.function not in seen_functions:
            errors.append(f"demand {e.function}@{e.server}: unknown function")
        if e.server not in seen_servers:
            errors.append(f"demand {e.function}@{e.server}: unknown server")
        if not (_finite(e.rate) and e.rate >= 0):
            errors.append(f"demand {e.function}@{e.server}: rate must be non-negative")
        if (e.function, e.server) in seen_demand:
            errors.append(f"demand {e.function}@{e.server}: duplicate entry")
        seen_demand.add((e.function, e.server))

    cost = scenario.cost_model
    if not (_finite(cost.unit_cost) and cost.unit_cost > 0):
        errors.append("cost.unit_cost must be positive")
    if not (_finite(cost.max_cost) and cost.max_cost > 0):
        errors.append("cost.max_cost must be positive")
    return errors


# -- serialization ---------------------------------------------------------


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "services": [
            {
                "id": s.id,
                "mu": float(s.mu),
                "r_s": float(s.r_s),
                "functions": [{"id": f.id, "d_in": float(f.d_in), "d_out": float(f.d_out)} for f in s.functions],
            }
            for s in scenario.services
        ],
        "dependencies": [
            {"from": e.caller, "to": e.callee, "acfc": float(e.acfc)} for e in scenario.dependency_graph.edges
        ],
        "servers": [{"id": n.id, "r_n": float(n.r_n)} for n in scenario.servers],
        "network": {
            "delay_ms": [[float(v) for v in row] for row in scenario.network.delay],
            "bandwidth_mbps": [[None if v is None else float(v) for v in row] for row in scenario.network.bandwidth],
        },
        "demand": [{"function": e.function, "server": e.server, "rate": float(e.rate)}
                   for e in scenario.demand.entries],
        "cost": {"unit_cost": float(scenario.cost_model.unit_cost),
                 "max_cost": float(scenario.cost_model.max_cost)},
    }
    if scenario.seed is not None:
        doc["meta"] = {"seed": int(scenario.seed)}
    return doc


def _num(v: Any, where: str) -> float:
    if not _finite(v):
        raise ScenarioFormatError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _str(v: Any, where: str) -> str:
    if not isinstance(v, str):
        raise ScenarioFormatError(f"{where}: expected a string id, got {v!r}")
    return v


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    """Build a Scenario from its JSON document. Structure is checked; invariants are not."""
    try:
        services = []
        for i, s in enumerate(doc["services"]):
            funcs = tuple(
                FunctionSpec(_str(f["id"], f"services[{i}].functions[{k}].id"),
                             _num(f["d_in"], f"function {f['id']} d_in"),
                             _num(f["d_out"], f"function {f['id']} d_out"))
                for k, f in enumerate(s["functions"])
            )
            services.append(ServiceSpec(_str(s["id"], f"services[{i}].id"), funcs,
                                        _num(s["mu"], f"service {s['id']} mu"),
                                        _num(s["r_s"], f"service {s['id']} r_s")))
        edges = tuple(
            Dependency(_str(e["from"], f"dependencies[{k}].from"), _str(e["to"], f"dependencies[{k}].to"),
                       _num(e["acfc"], f"dependencies[{k}].acfc"))
            for k, e in enumerate(doc["dependencies"])
        )
        servers = tuple(ServerSpec(_str(n["id"], f"servers[{k}].id"), _num(n["r_n"], f"server {n['id']} r_n"))
                        for k, n in enumerate(doc["servers"]))
        net = doc["network"]
        delay = tuple(tuple(_num(v, f"network.delay_ms[{r}]") for v in row) for r, row in enumerate(net["delay_ms"]))
        bandwidth = tuple(
            tuple(INTRA if v is None else _num(v, f"network.bandwidth_mbps[{r}]") for v in row)
            for r, row in enumerate(net["bandwidth_mbps"])
        )
        demand = tuple(
            DemandEntry(_str(e["function"], f"demand[{k}].function"), _str(e["server"], f"demand[{k}].server"),
                        _num(e["rate"], f"demand[{k}].rate"))
            for k, e in enumerate(doc["demand"])
        )
        cost = CostModel(_num(doc["cost"]["unit_cost"], "cost.unit_cost"),
                         _num(doc["cost"]["max_cost"], "cost.max_cost"))
        seed = doc.get("meta", {}).get("seed")
    except (KeyError, TypeError, AttributeError) as exc:
        raise ScenarioFormatError(f"malformed scenario document: {exc!r}") from exc
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise ScenarioFormatError(f"meta.seed: expected an integer, got {seed!r}")

    services_t = tuple(services)
    graph = DependencyGraph(tuple(f.id for s in services_t for f in s.functions), edges)
    return Scenario(services_t, graph, servers, NetworkModel(delay, bandwidth), DemandProfile(demand), cost, seed)


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def dumps_scenario(scenario: Scenario) -> str:
    return _dumps(scenario_to_dict(scenario))


def loads_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario document must be a JSON object")
    return scenario_from_dict(doc)


def load_scenario(path: str | Path) -> Scenario:
    return loads_scenario(Path(path).read_text())


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(scenario))


def scheme_to_dict(scheme: DeploymentScheme) -> dict[str, Any]:
    return {"x": [list(row) for row in scheme.x], "servers": list(scheme.servers), "services": list(scheme.services)}


def scheme_from_dict(doc: Mapping[str, Any]) -> DeploymentScheme:
    try:
        servers = [_str(v, "servers[]") for v in doc["servers"]]
        services = [_str(v, "services[]") for v in doc["services"]]
        rows = doc["x"]
        for row in rows:
            for v in row:
                if not isinstance(v, int) or isinstance(v, bool):
                    raise ScenarioFormatError(f"x: instance counts must be integers, got {v!r}")
        return DeploymentScheme(tuple(servers), tuple(services), tuple(tuple(row) for row in rows))
    except (KeyError, TypeError) as exc:
        raise ScenarioFormatError(f"malformed scheme document: {exc!r}") from exc


def dumps_scheme(scheme: DeploymentScheme) -> str:
    return _dumps(scheme_to_dict(scheme))


def loads_scheme(text: str) -> DeploymentScheme:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scheme document must be a JSON object")
    if "x" not in doc and isinstance(doc.get("scheme"), dict):  # a solver result document
        doc = doc["scheme"]
    return scheme_from_dict(doc)


def load_scheme(path: str | Path) -> DeploymentScheme:
    return loads_scheme(Path(path).read_text())


def save_scheme(scheme: DeploymentScheme, path: str | Path) -> None:
    Path(path).write_text(dumps_scheme(scheme))
