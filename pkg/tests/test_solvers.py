import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import linear_scenario, make_scenario, oracle_system_time, oracle_violations
from msplace.errors import InfeasibleScenarioError, InsufficientCapacityError, StateSpaceTooLargeError
from msplace.evaluator import isclose, system_average_time
from msplace.generator import GeneratorConfig, generate_scenario
from msplace.model import DeploymentScheme
from msplace.solvers import (
    SolverContext,
    best_server,
    chain_order,
    deploy_spread,
    exhaustive_optimal,
    improvement_pass,
    solve,
    solve_b_qsrfp,
    solve_bd_qsrfp,
    solve_d_qsrfp,
    solve_random,
    transmission_score,
)
from msplace.solvers import greedy
from msplace.solvers.placement import Placement
from msplace.solvers.result import SolverResult

# -- best_server -------------------------------------------------------------


def test_best_server_single_candidate():
    sc = linear_scenario(n_servers=3, lengths=(10.0,), demand=[("f0", 0, 1.0)], r_n=[0.5, 0.5, 2.0])
    assert best_server("s0", np.zeros((3, 1), dtype=int), sc) == "n2"


def test_best_server_nothing_fits():
    sc = linear_scenario(n_servers=2, lengths=(10.0,), demand=[("f0", 0, 1.0)], r_n=[0.5, 0.5])
    assert best_server("s0", np.zeros((2, 1), dtype=int), sc) is None


def test_best_server_without_placed_neighbours_takes_first_fit():
    # s1 is called by s0, which has no instances; no users call s1 directly
    sc = linear_scenario(n_servers=3, lengths=(10.0, 10.0), demand=[("f0", 2, 1.0)], r_n=[0.5, 5.0, 5.0])
    assert best_server("s1", np.zeros((3, 2), dtype=int), sc) == "n1"


def test_best_server_colocates_with_predecessor():
    sc = linear_scenario(n_servers=2, lengths=(10.0, 500.0), demand=[("f0", 0, 1.0)])
    X = np.array([[0, 0], [2, 0]])
    assert best_server("s1", X, sc) == "n1"
    scheme = DeploymentScheme.from_array(X, sc.server_ids, sc.service_ids)
    assert best_server("s1", scheme, sc) == "n1"


def test_best_server_follows_users_for_entry_service():
    sc = linear_scenario(n_servers=3, lengths=(10.0,), demand=[("f0", 1, 1.0)])
    assert best_server("s0", np.zeros((3, 1), dtype=int), sc) == "n1"


# -- deploy_spread -----------------------------------------------------------


def test_deploy_spread_single_instance_single_server():
    sc = linear_scenario(n_servers=1, lengths=(10.0,), demand=[("f0", 0, 1.0)])
    out = deploy_spread("s0", 1, np.zeros((1, 1), dtype=int), sc)
    np.testing.assert_array_equal(out, [[1]])


def test_deploy_spread_batches_then_requeries():
    sc = linear_scenario(n_servers=2, lengths=(10.0,), demand=[("f0", 1, 1.0)], r_n=[5.0, 2.0])
    out = deploy_spread("s0", 3, np.zeros((2, 1), dtype=int), sc)
    np.testing.assert_array_equal(out, [[1], [2]])


def test_deploy_spread_raises_when_capacity_runs_out():
    sc = linear_scenario(n_servers=2, lengths=(10.0,), demand=[("f0", 1, 1.0)], r_n=[1.0, 1.0])
    with pytest.raises(InsufficientCapacityError) as info:
        deploy_spread("s0", 3, np.zeros((2, 1), dtype=int), sc)
    assert info.value.service == "s0"
    with pytest.raises(ValueError):
        deploy_spread("s0", 0, np.zeros((2, 1), dtype=int), sc)


def test_deploy_spread_ripple_moves_predecessor():
    # chain s0 -> s1 -> s2. s0 and s1 fill n0 (users are on n0), so s2 must go to n1.
    # Placing s1 next to s0 on n0 is best; after s2 lands on n1 the ripple pulls s1 over
    # when the s1 -> s2 call is far heavier than the s0 -> s1 call.
    sc = linear_scenario(n_servers=2, lengths=(20.0, 10.0, 5000.0), demand=[("f0", 0, 1.0)],
                         r_n=[2.0, 2.0])
    X = np.array([[1, 1, 0], [0, 0, 0]])
    out = deploy_spread("s2", 1, X, sc)
    np.testing.assert_array_equal(out[:, 2], [0, 1])
    np.testing.assert_array_equal(out[:, 1], [0, 1])  # re-placed next to s2
    np.testing.assert_array_equal(out[:, 0], [1, 0])  # s0 re-placed but unchanged: ripple stops
    assert system_average_time(out, sc).t_system < system_average_time(
        np.array([[1, 1, 0], [0, 0, 1]]), sc).t_system


def test_deploy_spread_ripple_leaves_optimal_neighbour():
    sc = linear_scenario(n_servers=2, lengths=(10.0, 10.0), demand=[("f0", 0, 1.0)])
    out = deploy_spread("s1", 1, np.array([[1, 0], [0, 0]]), sc)
    np.testing.assert_array_equal(out, [[1, 1], [0, 0]])


# -- B-QSRFP -----------------------------------------------------------------


def test_b_minimum_instances():
    sc = make_scenario([("a", 100.0, 1.0, [("fa", 1.0, 1.0)])], demand=[("fa", 0, 100.0), ("fa", 1, 50.0)])
    res = solve_b_qsrfp(sc)
    assert res.feasible and res.scheme.total("a") == 2


def test_b_places_callers_first(monkeypatch):
    # b has the better mu / r_s ratio but is called by a, so a must go first
    services = [("b", 400.0, 1.0, [("fb", 1.0, 1.0)]), ("a", 100.0, 1.0, [("fa", 1.0, 1.0)])]
    sc = make_scenario(services, [("fa", "fb", 1.0)], demand=[("fa", 0, 10.0)])
    order = []
    original = Placement.deploy_spread

    def spy(self, j, k):
        order.append(sc.service_ids[j])
        return original(self, j, k)

    monkeypatch.setattr(Placement, "deploy_spread", spy)
    solve_b_qsrfp(sc)
    assert order == ["a", "b"]


def test_b_service_order_switch(monkeypatch):
    services = [("lo", 100.0, 1.0, [("f1", 1.0, 1.0)]), ("hi", 300.0, 1.0, [("f2", 1.0, 1.0)])]
    sc = make_scenario(services, demand=[("f1", 0, 10.0), ("f2", 0, 10.0)])
    orders = {}
    original = Placement.deploy_spread
    for mode in ("pseudocode", "prose"):
        seen = []

        def spy(self, j, k, seen=seen):
            seen.append(sc.service_ids[j])
            return original(self, j, k)

        monkeypatch.setattr(Placement, "deploy_spread", spy)
        solve_b_qsrfp(sc, service_order=mode)
        orders[mode] = seen
    assert orders == {"pseudocode": ["lo", "hi"], "prose": ["hi", "lo"]}
    with pytest.raises(ValueError):
        solve_b_qsrfp(sc, service_order="sideways")


def test_b_reports_capacity_starvation():
    sc = make_scenario([("a", 100.0, 1.0, [("fa", 1.0, 1.0)])], demand=[("fa", 0, 500.0)], r_n=[1.0, 1.0])
    with pytest.raises(InfeasibleScenarioError):
        solve_b_qsrfp(sc)


# -- D-QSRFP -----------------------------------------------------------------


def test_d_single_chain():
    sc = make_scenario([("a", 100.0, 1.0, [("fa", 1.0, 1.0)])], demand=[("fa", 0, 150.0)])
    res = solve_d_qsrfp(sc)
    assert res.feasible and res.scheme.total("a") == 2


def test_d_reused_covered_service_gets_nothing_new(monkeypatch):
    # both chains end in service c; the first chain's top-up already covers the second
    services = [("a", 100.0, 1.0, [("fa", 900.0, 900.0)]), ("b", 100.0, 1.0, [("fb", 1.0, 1.0)]),
                ("c", 200.0, 1.0, [("fc1", 1.0, 1.0), ("fc2", 1.0, 1.0)])]
    sc = make_scenario(services, [("fa", "fc1", 1.0), ("fb", "fc2", 1.0)],
                       demand=[("fa", 0, 150.0), ("fb", 0, 20.0)])
    calls = []
    original = Placement.deploy_spread

    def spy(self, j, k):
        calls.append((sc.service_ids[j], k))
        return original(self, j, k)

    monkeypatch.setattr(Placement, "deploy_spread", spy)
    res = solve_d_qsrfp(sc)
    assert calls == [("a", 2), ("c", 1), ("b", 1)]
    assert res.feasible


def test_d_counts_demand_even_without_a_deficit():
    # chain 1 covers c with one instance (60 of 100); chain 2 adds 60 more, which needs a second
    services = [("a", 1000.0, 1.0, [("fa", 900.0, 900.0)]), ("b", 1000.0, 1.0, [("fb", 1.0, 1.0)]),
                ("c", 100.0, 1.0, [("fc1", 1.0, 1.0), ("fc2", 1.0, 1.0)])]
    sc = make_scenario(services, [("fa", "fc1", 1.0), ("fb", "fc2", 1.0)],
                       demand=[("fa", 0, 60.0), ("fb", 0, 60.0)])
    res = solve_d_qsrfp(sc)
    assert res.feasible and res.scheme.total("c") == 2


def test_d_chain_order_by_transmission():
    services = [("a", 100.0, 1.0, [("fa", 10.0, 10.0)]), ("b", 100.0, 1.0, [("fb", 300.0, 100.0)]),
                ("c", 100.0, 1.0, [("fc", 50.0, 50.0)])]
    # chain a: (20 + 100 * 2) * 1 = 220 KB per time; chain b: 400 * 0.5 = 200
    sc = make_scenario(services, [("fa", "fc", 2.0)], demand=[("fa", 0, 1.0), ("fb", 1, 0.5)])
    ctx = SolverContext.build(sc)
    scores = {c.entry: transmission_score(c, sc) for c in ctx.chains}
    assert scores == pytest.approx({"fa": 220.0, "fb": 200.0})
    assert [c.entry for c in chain_order(ctx.chains, sc)] == ["fa", "fb"]


# -- BD ----------------------------------------------------------------------


def fake(t, feasible=True, name="x"):
    return SolverResult(DeploymentScheme(("n0",), ("a",), ((1,),)), t, 1.0, name, feasible)


def test_bd_picks_smaller(monkeypatch):
    sc = linear_scenario(n_servers=1, lengths=(1.0,), demand=[("f0", 0, 1.0)])
    monkeypatch.setattr(greedy, "solve_b_qsrfp", lambda *a, **k: fake(8.0, name="b-qsrfp"))
    monkeypatch.setattr(greedy, "solve_d_qsrfp", lambda *a, **k: fake(9.5, name="d-qsrfp"))
    res = solve_bd_qsrfp(sc)
    assert res.t_system == 8.0 and res.details["chosen"] == "b-qsrfp" and res.algorithm == "bd-qsrfp"


def test_bd_falls_back_to_feasible(monkeypatch):
    sc = linear_scenario(n_servers=1, lengths=(1.0,), demand=[("f0", 0, 1.0)])

    def starving(*a, **k):
        raise InfeasibleScenarioError("no room")

    monkeypatch.setattr(greedy, "solve_b_qsrfp", starving)
    monkeypatch.setattr(greedy, "solve_d_qsrfp", lambda *a, **k: fake(9.5, name="d-qsrfp"))
    assert solve_bd_qsrfp(sc).details["chosen"] == "d-qsrfp"
    monkeypatch.setattr(greedy, "solve_d_qsrfp", lambda *a, **k: fake(1.0, feasible=False))
    with pytest.raises(InfeasibleScenarioError):
        solve_bd_qsrfp(sc)


# -- improvement pass --------------------------------------------------------


def test_improve_respects_budget():
    sc = linear_scenario(n_servers=2, lengths=(500.0,), demand=[("f0", 0, 1.0), ("f0", 1, 1.0)], max_cost=1.0)
    X = np.array([[1], [0]])
    np.testing.assert_array_equal(improvement_pass(X, sc), X)


def test_improve_stops_without_strict_gain():
    sc = linear_scenario(n_servers=2, lengths=(500.0,), demand=[("f0", 0, 1.0)])
    X = np.array([[1], [0]])
    np.testing.assert_array_equal(improvement_pass(X, sc), X)


def test_improve_adds_instance_near_hot_users():
    sc = linear_scenario(n_servers=2, lengths=(500.0,), demand=[("f0", 0, 1.0), ("f0", 1, 9.0)])
    X = np.array([[1], [0]])
    before = system_average_time(X, sc).t_system
    out = improvement_pass(DeploymentScheme.from_array(X, sc.server_ids, sc.service_ids), sc)
    after = system_average_time(out, sc)
    assert after.t_system < before and after.constraints_ok
    assert out.total("s0") >= 2


# -- baselines ---------------------------------------------------------------


def test_random_single_server_is_deterministic():
    sc = linear_scenario(n_servers=1, lengths=(10.0, 10.0), demand=[("f0", 0, 150.0)])
    res = solve_random(sc, trials=10)
    assert res.t_system == 0.0 and res.details["t_std"] == 0.0 and res.details["feasible_trials"] == 10
    np.testing.assert_array_equal(res.scheme.as_array(), [[2, 2]])


def test_random_reports_spread_and_is_seeded():
    sc = generate_scenario(GeneratorConfig(seed=3))
    a, b = solve_random(sc, trials=20, seed=5), solve_random(sc, trials=20, seed=5)
    assert a.t_system == b.t_system and a.scheme == b.scheme
    assert a.details["t_best"] <= a.t_system and a.details["t_std"] >= 0
    with pytest.raises(ValueError):
        solve_random(sc, trials=0)


def test_optimal_single_server_returns_minimal_scheme():
    sc = linear_scenario(n_servers=1, lengths=(10.0, 10.0), demand=[("f0", 0, 150.0)], r_n=[20.0])
    res = exhaustive_optimal(sc)
    np.testing.assert_array_equal(res.scheme.as_array(), [[2, 2]])
    assert res.t_system == 0.0


def hand_enumerated_optimum(sc, cap):
    best = math.inf
    for flat in itertools.product(range(cap + 1), repeat=sc.n_servers * sc.n_services):
        X = np.array(flat).reshape(sc.n_servers, sc.n_services)
        if oracle_violations(sc, X) or (X.sum(axis=0) == 0).any():
            continue
        best = min(best, oracle_system_time(sc, X))
    return best


def test_optimal_matches_hand_enumeration():
    services = [("a", 100.0, 1.0, [("fa", 700.0, 300.0)]), ("b", 100.0, 2.0, [("fb", 400.0, 400.0)])]
    sc = make_scenario(services, [("fa", "fb", 1.0)], delay=[[0.0, 4.0], [4.0, 0.0]],
                       demand=[("fa", 0, 80.0), ("fa", 1, 60.0)], r_n=[4.0, 5.0])
    res = exhaustive_optimal(sc)
    assert isclose(res.t_system, hand_enumerated_optimum(sc, 5))
    assert res.feasible and res.details["states"] > 1


def test_optimal_guard_and_infeasible():
    sc = linear_scenario(n_servers=2, lengths=(1.0, 1.0), demand=[("f0", 0, 1.0)], r_n=[50.0, 50.0])
    with pytest.raises(StateSpaceTooLargeError):
        exhaustive_optimal(sc, guard=10)
    starved = linear_scenario(n_servers=2, lengths=(1.0,), demand=[("f0", 0, 500.0)], r_n=[1.0, 1.0])
    with pytest.raises(InfeasibleScenarioError):
        exhaustive_optimal(starved)


# -- dispatcher and properties ----------------------------------------------


def test_solve_dispatch():
    sc = generate_scenario(GeneratorConfig(seed=1))
    for name in ("b-qsrfp", "d-qsrfp", "bd-qsrfp", "random"):
        res = solve(sc, name, trials=5)
        assert res.algorithm == name and res.feasible
        assert res.to_dict()["scheme"]["services"] == list(sc.service_ids)
    improved = solve(sc, "b-qsrfp", improve=True)
    assert improved.details["improved"] and improved.t_system <= improved.details["t_before"]
    with pytest.raises(ValueError):
        solve(sc, "simulated-annealing")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_greedy_schemes_are_feasible_and_minimal(seed):
    sc = generate_scenario(GeneratorConfig(seed=seed, n_servers=3, n_services=10, user_count=400))
    ctx = SolverContext.build(sc)
    b = solve_b_qsrfp(sc, context=ctx)
    d = solve_d_qsrfp(sc, context=ctx)
    for res in (b, d):
        assert res.feasible and oracle_violations(sc, res.scheme.as_array()) == []
        assert isclose(res.t_system, oracle_system_time(sc, res.scheme.as_array()))
    assert [b.scheme.total(s) for s in sc.service_ids] == ctx.required
