"""Linearize calling subgraphs into function chains and propagate demand along them.

Demand coefficients are carried as exact fractions so that capability checks and
instance-count rounding agree bit for bit across solvers and the constraint checker.
"""

from __future__ import annotations

import weakref
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction

from msplace.errors import ChainError
from msplace.model import USER, DependencyGraph, Scenario


@dataclass(frozen=True)
class FunctionChain:
    """One user-requested function and the linear sequence of functions it triggers.

    ``hop_acfc[m]`` and ``virtual_flags[m]`` describe the hop between ``hops[m]``
    and ``hops[m + 1]``. A virtual hop links two functions that are not caller and
    callee in the real graph; it moves no data and carries ACFC 0.

    ``demand_coeff[m]`` is the expected number of calls to ``hops[m]`` per request
    to the entry, summed over every real call path (so it ignores virtual hops).
    """

    entry: str
    hops: tuple[str, ...]
    hop_acfc: tuple[float, ...]
    virtual_flags: tuple[bool, ...]
    demand_coeff: tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.hops)

    def to_dict(self) -> dict:
        return {
            "entry": self.entry,
            "hops": list(self.hops),
            "hop_acfc": list(self.hop_acfc),
            "virtual": list(self.virtual_flags),
            "demand_coeff": [float(c) for c in self.demand_coeff],
        }


@dataclass(frozen=True)
class DemandSummary:
    """Per-service request rates from users (gamma_u) and from other services (gamma_s)."""

    gamma_u: dict[str, Fraction]
    gamma_s: dict[str, Fraction]

    def total(self, service: str) -> Fraction:
        return self.gamma_u.get(service, Fraction(0)) + self.gamma_s.get(service, Fraction(0))

    def to_dict(self) -> dict:
        return {"gamma_u": {k: float(v) for k, v in self.gamma_u.items()},
                "gamma_s": {k: float(v) for k, v in self.gamma_s.items()}}


def _callees(graph: DependencyGraph, function: str) -> list[tuple[str, float]]:
    # zero-ACFC edges are never invoked, so they are not part of a calling subgraph
    return sorted((e.callee, e.acfc) for e in graph.out_edges(function) if e.acfc > 0)


def calling_subgraph_to_chain(entry: str, graph: DependencyGraph) -> FunctionChain:
    """Convert the calling subgraph rooted at `entry` into a single chain.

    Functions are listed in depth-first preorder with callees visited in
    lexicographic id order; each reachable function appears exactly once. A hop is
    real when the next function was discovered from the current one, otherwise it
    is a virtual call.
    """
    if entry == USER or not graph.has_node(entry):
        raise ChainError(f"unknown entry function {entry!r}")

    order: list[str] = []
    parent: dict[str, tuple[str, float] | None] = {entry: None}
    state: dict[str, int] = {entry: 1}
    postorder: list[str] = []
    order.append(entry)
    frames = [(entry, iter(_callees(graph, entry)))]
    while frames:
        node, it = frames[-1]
        nxt = next(it, None)
        if nxt is None:
            state[node] = 2
            postorder.append(node)
            frames.pop()
            continue
        child, acfc = nxt
        seen = state.get(child, 0)
        if seen == 1:
            raise ChainError(f"dependency cycle through {child!r} below {entry!r}")
        if seen == 0:
            state[child] = 1
            parent[child] = (node, acfc)
            order.append(child)
            frames.append((child, iter(_callees(graph, child))))

    hop_acfc: list[float] = []
    virtual: list[bool] = []
    for prev, nxt in zip(order, order[1:]):
        link = parent[nxt]
        if link is not None and link[0] == prev:
            hop_acfc.append(link[1])
            virtual.append(False)
        else:
            hop_acfc.append(0.0)
            virtual.append(True)

    coeff: dict[str, Fraction] = {f: Fraction(0) for f in order}
    coeff[entry] = Fraction(1)
    for node in reversed(postorder):  # topological order of the subgraph
        for child, acfc in _callees(graph, node):
            coeff[child] += coeff[node] * Fraction(acfc)

    return FunctionChain(entry, tuple(order), tuple(hop_acfc), tuple(virtual),
                         tuple(coeff[f] for f in order))


def chain_coefficients(chain: FunctionChain) -> list[float]:
    """Accumulated ACFC product along the chain's own hop list (virtual hops zero it)."""
    out = [1.0]
    for acfc in chain.hop_acfc:
        out.append(out[-1] * acfc)
    return out


_chain_cache: weakref.WeakKeyDictionary[Scenario, tuple[FunctionChain, ...]] = weakref.WeakKeyDictionary()


def build_chains(scenario: Scenario) -> tuple[FunctionChain, ...]:
    """Chains for every function with positive total user demand, in declaration order."""
    cached = _chain_cache.get(scenario)
    if cached is None:
        graph = scenario.dependency_graph
        cached = tuple(calling_subgraph_to_chain(f, graph)
                       for f in scenario.function_ids if scenario.total_demand(f) > 0)
        _chain_cache[scenario] = cached
    return cached


def _exact_total(rates: Iterable[float]) -> Fraction:
    return sum((Fraction(r) for r in rates), Fraction(0))


def demand_summary(scenario: Scenario,
                   chains: Iterable[FunctionChain] | Mapping[str, FunctionChain] | None = None) -> DemandSummary:
    """Compute gamma_u (direct user demand) and gamma_s (demand induced by calls) per service."""
    if chains is None:
        chains = build_chains(scenario)
    by_entry = dict(chains) if isinstance(chains, Mapping) else {c.entry: c for c in chains}

    entry_totals: dict[str, Fraction] = {}
    for e in scenario.demand.entries:
        entry_totals[e.function] = entry_totals.get(e.function, Fraction(0)) + Fraction(e.rate)

    gamma_u = {sid: Fraction(0) for sid in scenario.service_ids}
    gamma_s = {sid: Fraction(0) for sid in scenario.service_ids}
    for function, total in entry_totals.items():
        gamma_u[scenario.service_ids[scenario.owner[function]]] += total

    for function in scenario.function_ids:
        total = entry_totals.get(function, Fraction(0))
        if total <= 0:
            continue
        chain = by_entry.get(function)
        if chain is None:
            raise ChainError(f"missing chain for demanded function {function!r}")
        for hop, coeff in zip(chain.hops[1:], chain.demand_coeff[1:]):
            gamma_s[scenario.service_ids[scenario.owner[hop]]] += total * coeff
    return DemandSummary(gamma_u, gamma_s)
