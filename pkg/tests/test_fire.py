import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bushfire_opf.fire import (FireState, ParamSchedule, SpreadParams, advance_fire, generate_schedule,
                               ignition_probability, random_origins, read_trajectory_csv, simulate_trajectory,
                               step_fire, write_trajectory_csv)
from bushfire_opf.grid import GridMap, neighbors1


def test_ignition_probability_values():
    assert ignition_probability(0, 0.7) == 0.0
    assert ignition_probability(1, 0.3) == pytest.approx(0.3)
    assert ignition_probability(3, 0.5) == pytest.approx(0.875)


def test_frozen_fire(rng):
    g = GridMap.uniform(9, 9)
    b = g.mask([(2, 2), (5, 5), (5, 6)])
    assert (step_fire(g, b, SpreadParams.constant(0.0, 0.0), rng) == b).all()


def test_deterministic_limits(rng):
    g = GridMap.uniform(9, 9)
    out = step_fire(g, g.mask([(5, 5)]), SpreadParams.constant(1.0, 1.0), rng)
    assert g.nodes_of(out) == neighbors1(g, (5, 5))


def test_ignition_frequency_monte_carlo():
    # one burning neighbour, p_plus = 0.5: count ignitions of a fixed node over many periods
    g = GridMap.uniform(3, 1)
    rng = np.random.default_rng(7)
    b = g.mask([(1, 1)])
    n = 100_000
    hits = sum(bool(step_fire(g, b, SpreadParams.constant(0.5, 0.0), rng)[0, 1]) for _ in range(n))
    sigma = np.sqrt(0.25 / n)
    assert abs(hits / n - 0.5) < 3 * sigma


def test_transition_frequencies_match_one_step_model():
    # node (2,2) has 3 burning neighbours; the burning ones are extinguished with p_minus
    g = GridMap.uniform(3, 3)
    fire = [(1, 1), (2, 1), (3, 1)]
    b = g.mask(fire)
    params = SpreadParams.constant(0.3, 0.25)
    rng = np.random.default_rng(11)
    n = 40_000
    lit_centre = 0
    out_first = 0
    for _ in range(n):
        nxt = step_fire(g, b, params, rng)
        lit_centre += nxt[1, 1]
        out_first += not nxt[0, 0]
    for freq, p in ((lit_centre / n, ignition_probability(3, 0.3)), (out_first / n, 0.25)):
        assert abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n)


def test_new_ignitions_survive_their_first_period():
    g = GridMap.uniform(5, 5)
    rng = np.random.default_rng(3)
    out = step_fire(g, g.mask([(3, 3)]), SpreadParams.constant(1.0, 1.0), rng)
    assert out.sum() == 8 and not out[2, 2]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_monotone_without_containment(seed, p):
    g = GridMap.uniform(12, 12)
    rng = np.random.default_rng(seed)
    b = g.mask(random_origins(g, 2, rng))
    for _ in range(5):
        nxt = step_fire(g, b, SpreadParams.constant(p, 0.0), rng)
        assert (nxt >= b).all()
        b = nxt


def test_extinct_when_fully_contained(rng):
    g = GridMap.uniform(10, 10)
    sched = ParamSchedule.constant(SpreadParams.constant(0.0, 1.0), 6)
    states = simulate_trajectory(g, [(4, 4), (7, 2)], sched, 6, rng)
    assert states[0].count == 2
    assert all(s.count == 0 for s in states[1:])


def test_trajectory_length_and_origin(rng):
    g = GridMap.uniform(10, 10)
    sched = ParamSchedule.constant(SpreadParams.constant(0.4, 0.2), 1)
    states = simulate_trajectory(g, [(3, 3)], sched, 1, rng)
    assert len(states) == 1 and g.nodes_of(states[0].burning) == {(3, 3)}


def test_trajectory_is_reproducible():
    g = GridMap.blocks(30, 20, 2)
    sched = generate_schedule(2, 40, 5, (0.2, 0.6), (0.1, 0.4), np.random.default_rng(1))
    a = simulate_trajectory(g, [(5, 5)], sched, 40, np.random.default_rng(99))
    b = simulate_trajectory(g, [(5, 5)], sched, 40, np.random.default_rng(99))
    assert all((x.burning == y.burning).all() for x, y in zip(a, b))


def test_transition_counts_are_consistent(rng):
    g = GridMap.blocks(20, 20, 4)
    b = g.mask(random_origins(g, 4, rng))
    for _ in range(8):
        b = step_fire(g, b, SpreadParams.constant(0.5, 0.2, 4), rng)
    nxt, (ign, spr, ext, sur) = advance_fire(g, b, SpreadParams.constant(0.5, 0.2, 4), rng)
    assert ext.sum() + sur.sum() == b.sum()
    assert sur.sum() == (b & nxt).sum()
    assert ign.sum() == (nxt & ~b).sum()
    assert (ign[:, 0] == 0).all() and (spr[:, 0] == 0).all()


def test_schedule_generation():
    rng = np.random.default_rng(5)
    s = generate_schedule(3, 200, 10, (0.2, 0.6), (0.1, 0.4), rng)
    assert s.plus.shape == (200, 3)
    for h in range(3):
        cps = s.change_times_plus[h]
        assert len(cps) == 10 and len(set(cps)) == 10 and min(cps) >= 2 and max(cps) <= 200
        jumps = np.flatnonzero(np.diff(s.plus[:, h])) + 2
        assert set(jumps) <= set(cps)
    assert ((s.plus >= 0.2) & (s.plus <= 0.6)).all() and ((s.minus >= 0.1) & (s.minus <= 0.4)).all()
    flat = generate_schedule(1, 50, 0, (0.2, 0.6), (0.1, 0.4), rng)
    assert np.ptp(flat.plus) == 0 and np.ptp(flat.minus) == 0
    with pytest.raises(ValueError):
        generate_schedule(1, 10, 10, (0.2, 0.6), (0.1, 0.4), rng)


def test_schedule_segments():
    s = ParamSchedule.from_segments(10, [(1, 0.2), (4, 0.6)], [(1, 0.3)])
    assert s.at(3).p_plus[0] == 0.2 and s.at(4).p_plus[0] == 0.6 and s.at(10).p_minus[0] == 0.3
    assert s.change_times_plus == ((4,),)


def test_origins_in_distinct_areas():
    g = GridMap.blocks(40, 40, 4)
    for seed in range(20):
        o = random_origins(g, 2, np.random.default_rng(seed))
        assert len({g.area(n) for n in o}) == 2
    o = random_origins(g, 4, np.random.default_rng(0))
    assert sorted(g.area(n) for n in o) == [0, 1, 2, 3]


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        SpreadParams(np.array([1.2]), np.array([0.1]))
    with pytest.raises(ValueError):
        SpreadParams(np.array([0.2, 0.3]), np.array([0.1]))


def test_trajectory_csv_round_trip(tmp_path, rng):
    g = GridMap.uniform(15, 15)
    sched = ParamSchedule.constant(SpreadParams.constant(0.4, 0.3), 8)
    states = simulate_trajectory(g, [(7, 7)], sched, 8, rng)
    p = tmp_path / "traj.csv"
    write_trajectory_csv(g, states, p)
    back = read_trajectory_csv(g, p)
    assert [s.t for s in back] == list(range(1, 9))
    assert all((x.burning == y.burning).all() for x, y in zip(states, back))
    header = p.read_text().splitlines()[0]
    assert header == "t,count,coordinates"
