import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bushfire_opf.harness import data_path
from bushfire_opf.lp import solve_highs
from bushfire_opf.network import all_scenario_weights, compute_ptdf, load_network
from bushfire_opf.opf import (InfeasibleError, Strategy, StochasticOPF, expected_cost, last_resort,
                              realized_shedding, static_opf, stochastic_opf, write_strategies_csv)

from conftest import make_network
from lp_oracle import vertex_optimum


def full_weights(net):
    return all_scenario_weights(net, np.ones(net.n_lines))


def test_static_single_dispatch(pair_net):
    strat, sol = static_opf(pair_net)
    assert strat.alpha == pytest.approx([3.0, 0.0])
    assert strat.beta == pytest.approx([3.0])
    assert sol.objective == pytest.approx(30.0)
    assert strat.flow(pair_net, 0, 1) == pytest.approx(3.0) and strat.flow(pair_net, 1, 0) == pytest.approx(-3.0)


def test_static_zero_load():
    net = make_network([(1, 2, 5, "generator", 0.0, 4.0, 10.0), (2, 8, 5, "consumer", 0.0, 0.0, 0.0)],
                       [(1, 2, 0.1, 4.0)])
    strat, sol = static_opf(net)
    assert np.allclose(strat.alpha, 0.0) and sol.objective == pytest.approx(0.0)


def two_generators():
    return make_network(
        [(1, 2, 2, "generator", 0.0, 4.0, 6.0), (2, 14, 2, "generator", 0.0, 4.0, 10.0),
         (3, 8, 8, "consumer", 5.0, 0.0, 0.0)],
        [(1, 3, 0.1, 6.0), (2, 3, 0.1, 6.0)],
    )


def test_cheap_generator_first():
    net = two_generators()
    strat, sol = static_opf(net)
    assert strat.alpha == pytest.approx([4.0, 1.0, 0.0])
    # on a radial network the balance rows fix the flows, so they alone define the feasible set
    nb, nl = net.n_buses, net.n_lines
    A_eq = np.hstack([np.eye(nb), net.incidence.T])
    ref = vertex_optimum(np.concatenate([net.costs, np.zeros(nl)]), A_eq, net.loads, np.zeros((0, nb + nl)),
                         np.zeros(0), np.concatenate([np.zeros(nb), -net.flow_caps]),
                         np.concatenate([net.capacities, net.flow_caps]))
    assert sol.objective == pytest.approx(ref)


def test_static_infeasible_reported(pair_net):
    net = make_network([(1, 2, 5, "generator", 0.0, 1.0, 10.0), (2, 8, 5, "consumer", 3.0, 0.0, 0.0)],
                       [(1, 2, 0.1, 4.0)])
    with pytest.raises(InfeasibleError):
        static_opf(net)


def test_certain_world_reduces_to_static(three_bus_net):
    static, sol = static_opf(three_bus_net)
    strat, cost = stochastic_opf(three_bus_net, np.ones(3), full_weights(three_bus_net), 20.0)
    assert cost == pytest.approx(sol.objective)
    assert expected_cost(three_bus_net, static, np.ones(3), full_weights(three_bus_net), 20.0) \
        == pytest.approx(sol.objective)


def test_isolated_consumer_closed_form():
    net = make_network([(1, 3, 3, "consumer", 3.0, 0.0, 0.0), (2, 9, 9, "generator", 0.0, 0.0, 1.0)], [])
    strat, cost = stochastic_opf(net, np.array([0.5, 1.0]), [np.ones(1), np.ones(1)], 20.0)
    assert cost == pytest.approx(20.0 * 0.5 * 3.0)


def test_zero_strategy_cost(three_bus_net):
    p = np.array([0.9, 0.6, 0.3])
    rho = all_scenario_weights(three_bus_net, np.array([0.8, 0.4]))
    zero = Strategy(np.zeros(3), np.zeros(2))
    assert expected_cost(three_bus_net, zero, p, rho, 20.0) == pytest.approx(20.0 * (p @ three_bus_net.loads))


def test_solver_objective_equals_expected_cost(three_bus_net):
    p = np.array([0.9, 0.6, 0.3])
    rho = all_scenario_weights(three_bus_net, np.array([0.8, 0.4]))
    model = StochasticOPF(three_bus_net, 20.0)
    lp = model.build_lp(p, rho)
    sol = solve_highs(lp)
    strat = model.solve(p, rho)
    assert model.expected_cost(strat, p, rho) == pytest.approx(sol.objective, abs=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimum_beats_random_feasible_strategies(seed):
    rng = np.random.default_rng(seed)
    net = load_network(data_path("ieee11.json"))
    p_bus = rng.uniform(0, 1, net.n_buses)
    rho = all_scenario_weights(net, rng.uniform(0, 1, net.n_lines))
    model = StochasticOPF(net, 20.0)
    best = model.expected_cost(model.solve(p_bus, rho), p_bus, rho)
    ptdf = compute_ptdf(net)
    for _ in range(20):
        alpha = rng.uniform(0, 1, net.n_buses) * net.capacities
        beta = ptdf.flows(alpha - net.loads)
        if np.any(np.abs(beta) > net.flow_caps):
            continue
        assert best <= model.expected_cost(Strategy(alpha, beta), p_bus, rho) + 1e-9


def test_pruned_lp_matches_full_lp():
    net = load_network(data_path("ieee11.json"))
    rng = np.random.default_rng(4)
    model = StochasticOPF(net, 20.0)
    for _ in range(10):
        p_bus = np.where(rng.random(net.n_buses) < 0.3, 0.0, rng.uniform(0, 1, net.n_buses))
        p_line = np.where(rng.random(net.n_lines) < 0.5, 1.0, rng.uniform(0, 1, net.n_lines))
        rho = all_scenario_weights(net, p_line)
        full = solve_highs(model.build_lp(p_bus, rho))
        strat = model.solve(p_bus, rho)
        assert model.expected_cost(strat, p_bus, rho) == pytest.approx(full.objective, abs=1e-7)


def test_failed_assets_are_pinned(three_bus_net):
    p = np.array([1.0, 1.0, 1.0])
    rho = full_weights(three_bus_net)
    strat = StochasticOPF(three_bus_net, 20.0).solve(p, rho, line_failed=[False, True])
    assert strat.beta[1] == 0.0
    strat = StochasticOPF(three_bus_net, 20.0).solve(p, rho, bus_failed=[True, False, False])
    assert strat.alpha[0] == 0.0 and np.all(strat.beta == 0.0)


def test_realized_shedding_examples(pair_net):
    strat = Strategy(np.array([3.0, 0.0]), np.array([3.0]))
    ls, cost = realized_shedding(pair_net, strat, [True, True], [True], 20.0)
    assert np.allclose(ls, 0.0) and cost == pytest.approx(30.0)
    idle = Strategy(np.zeros(2), np.zeros(1))
    ls, cost = realized_shedding(pair_net, idle, [True, True], [False], 20.0)
    assert ls[1] == 3.0 and cost == pytest.approx(60.0)
    ls, cost = realized_shedding(pair_net, strat, [True, False], [True], 20.0)
    assert ls[1] == 0.0 and cost == pytest.approx(30.0)   # generation is still paid for


def test_extensive_form_equals_monte_carlo(three_bus_net):
    net = three_bus_net
    p_bus = np.array([0.8, 0.7, 0.9])
    p_line = np.array([0.6, 0.75])
    rho = all_scenario_weights(net, p_line)
    strat, obj = stochastic_opf(net, p_bus, rho, 20.0)
    rng = np.random.default_rng(8)
    n = 100_000
    bus_ok = rng.random((n, 3)) < p_bus
    line_ok = rng.random((n, 2)) < p_line
    costs = np.array([realized_shedding(net, strat, b, l, 20.0)[1] for b, l in zip(bus_ok, line_ok)])
    assert abs(costs.mean() - obj) <= 3 * costs.std(ddof=1) / np.sqrt(n)


def test_last_resort_covers_load_proportionally():
    net = load_network(data_path("ieee11.json"))
    s = last_resort(net)
    assert s.alpha.sum() == pytest.approx(net.loads.sum())
    assert np.all(s.alpha <= net.capacities + 1e-12) and np.all(s.beta == 0)
    frac = s.alpha[net.capacities > 0] / net.capacities[net.capacities > 0]
    assert np.ptp(frac) < 1e-12


def test_strategy_csv(tmp_path, pair_net):
    p = tmp_path / "s.csv"
    write_strategies_csv(pair_net, [(2, Strategy(np.array([3.0, 0.0]), np.array([3.0])))], p)
    rows = p.read_text().splitlines()
    assert rows[0] == "t,kind,element,value" and len(rows) == 4


def test_unbalanced_plan_parks_deficit_on_a_doomed_slack(pair_net):
    # the online LP has no balance row, so a slack bus that surely fails absorbs the whole deficit
    strat, obj = stochastic_opf(pair_net, np.array([0.0, 1.0]), full_weights(pair_net), 20.0)
    assert strat.alpha == pytest.approx([0.0, 0.0])
    assert strat.beta == pytest.approx([3.0])
    assert obj == pytest.approx(0.0)
    # with the slack certain to work the deficit costs the shedding price, so generating is cheaper
    strat, obj = stochastic_opf(pair_net, np.array([1.0, 1.0]), full_weights(pair_net), 20.0)
    assert strat.alpha == pytest.approx([3.0, 0.0]) and obj == pytest.approx(30.0)
