"""Scenario builders and independent reference implementations used by the tests.

The oracles here deliberately share no code with msplace.evaluator or msplace.chains:
they work from the raw scenario document and enumerate everything explicitly.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from msplace.model import scenario_from_dict


def make_scenario(services, edges=(), n_servers=2, delay=None, bandwidth=None, demand=(), r_n=None,
                  unit_cost=1.0, max_cost=1e9, seed=None):
    """services: [(sid, mu, r_s, [(fid, d_in, d_out), ...])]; edges: [(from, to, acfc)];
    demand: [(fid, server_index, rate)]."""
    n = n_servers
    delay = delay if delay is not None else [[0.0 if v == w else 5.0 for w in range(n)] for v in range(n)]
    bandwidth = bandwidth if bandwidth is not None else [[None if v == w else 1000.0 for w in range(n)]
                                                         for v in range(n)]
    r_n = r_n if r_n is not None else [100.0] * n
    doc = {
        "services": [{"id": sid, "mu": mu, "r_s": r_s,
                      "functions": [{"id": f, "d_in": a, "d_out": b} for f, a, b in funcs]}
                     for sid, mu, r_s, funcs in services],
        "dependencies": [{"from": a, "to": b, "acfc": c} for a, b, c in edges],
        "servers": [{"id": f"n{k}", "r_n": r_n[k]} for k in range(n)],
        "network": {"delay_ms": delay, "bandwidth_mbps": bandwidth},
        "demand": [{"function": f, "server": f"n{k}", "rate": r} for f, k, r in demand],
        "cost": {"unit_cost": unit_cost, "max_cost": max_cost},
    }
    if seed is not None:
        doc["meta"] = {"seed": seed}
    return scenario_from_dict(doc)


def linear_scenario(n_servers=2, lengths=(1000.0,), **kw):
    """One service per function, chain f0 -> f1 -> ... with ACFC 1."""
    services = [(f"s{i}", 100.0, 1.0, [(f"f{i}", d / 2, d / 2)]) for i, d in enumerate(lengths)]
    edges = [(f"f{i}", f"f{i + 1}", 1.0) for i in range(len(lengths) - 1)]
    return make_scenario(services, edges, n_servers=n_servers, **kw)


# -- independent oracles -----------------------------------------------------


def _raw(scenario):
    owner = {f.id: s.id for s in scenario.services for f in s.functions}
    data = {f.id: f.d_in + f.d_out for s in scenario.services for f in s.functions}
    callees = {}
    for e in scenario.dependency_graph.edges:
        if e.acfc > 0:
            callees.setdefault(e.caller, []).append((e.callee, e.acfc))
    for v in callees.values():
        v.sort()
    return owner, data, callees


def oracle_chain(entry, callees):
    """(functions, real_flags) in DFS preorder; real_flags[m] tells if hop m -> m+1 is a real call."""
    order, parent = [], {}

    def visit(f):
        order.append(f)
        for g, _ in callees.get(f, []):
            if g not in parent and g != entry:
                parent[g] = f
                visit(g)

    visit(entry)
    return order, [parent.get(b) == a for a, b in zip(order, order[1:])]


def oracle_system_time(scenario, X):
    """T(X) by enumerating every (origin, response path) combination explicitly."""
    owner, data, callees = _raw(scenario)
    sidx = {s.id: i for i, s in enumerate(scenario.services)}
    n = len(scenario.servers)
    srv = {s.id: k for k, s in enumerate(scenario.servers)}
    rates = {}
    for e in scenario.demand.entries:
        rates.setdefault(e.function, [0.0] * n)[srv[e.server]] += e.rate
    demanded = {f: r for f, r in rates.items() if sum(r) > 0}
    grand = sum(sum(r) for r in demanded.values())
    if grand == 0:
        return 0.0

    def hop(a, b, d):
        if a == b:
            return 0.0
        return d / scenario.network.bandwidth[a][b] + scenario.network.delay[a][b]

    total = 0.0
    for f, r in demanded.items():
        order, real = oracle_chain(f, callees)
        cols = [[int(X[k][sidx[owner[g]]]) for k in range(n)] for g in order]
        t_chain = 0.0
        for origin in range(n):
            if r[origin] == 0:
                continue
            for path in itertools.product(range(n), repeat=len(order)):
                p = 1.0
                for m, k in enumerate(path):
                    p *= cols[m][k] / sum(cols[m])
                if p == 0:
                    continue
                t = hop(origin, path[0], data[order[0]])
                for m in range(1, len(order)):
                    t += hop(path[m - 1], path[m], data[order[m]] if real[m - 1] else 0.0)
                t_chain += r[origin] / sum(r) * p * t
        total += sum(r) / grand * t_chain
    return total


def oracle_service_demand(scenario):
    """Exact per-service request rate: user rate times the sum over every real call path."""
    owner, _, callees = _raw(scenario)
    need = {s.id: Fraction(0) for s in scenario.services}
    totals = {}
    for e in scenario.demand.entries:
        totals[e.function] = totals.get(e.function, Fraction(0)) + Fraction(e.rate)

    def walk(f, weight):
        need[owner[f]] += weight
        for g, a in callees.get(f, []):
            walk(g, weight * Fraction(a))

    for f, rate in totals.items():
        if rate > 0:
            walk(f, rate)
    return need


def oracle_violations(scenario, X):
    """Names of violated constraints: ('resource', server) / ('cost', 'system') / ('capability', service)."""
    out = []
    used_total = Fraction(0)
    for k, n in enumerate(scenario.servers):
        used = sum((int(X[k][i]) * Fraction(s.r_s) for i, s in enumerate(scenario.services)), Fraction(0))
        used_total += used
        if used > Fraction(n.r_n):
            out.append(("resource", n.id))
    if Fraction(scenario.cost_model.unit_cost) * used_total > Fraction(scenario.cost_model.max_cost):
        out.append(("cost", "system"))
    need = oracle_service_demand(scenario)
    for i, s in enumerate(scenario.services):
        inst = sum(int(X[k][i]) for k in range(len(scenario.servers)))
        if inst < 0 or Fraction(s.mu) * inst < need[s.id]:
            out.append(("capability", s.id))
    for row in X:
        for v in row:
            if int(v) != v or v < 0:
                out.append(("integrality", str(v)))
    return out
