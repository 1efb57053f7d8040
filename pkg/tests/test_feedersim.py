import json
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpres.errors import NonRadialBase, NonRadialIsland, OutOfRange, SchemaError
from cpres.feedersim import (Contingency, FeederEnv, LoadProfile, check_radiality, count_unrestored,
                             effective_contingencies, load_feeder, solve_power_flow, step_reward)

from oracles import brute_force_restorable, exact_distflow, small_feeder


def f13_dict():
    return json.loads(resources.files("cpres.data").joinpath("f13.json").read_text())


# ---- loading -----------------------------------------------------------------

def test_f13_preset_shape():
    m = load_feeder("f13")
    assert m.n_sw == 4 and len(m.critical) == 3
    assert check_radiality(m, m.in_service(m.default_switch_states())).radial


def test_f123_preset_shape():
    m = load_feeder("F123")
    assert m.n_buses == 123 and m.n_sw == 8
    assert check_radiality(m, m.in_service(m.default_switch_states())).radial


def test_base_cycle_rejected():
    d = f13_dict()
    for s in d["switches"]:
        s["state"] = "closed"
    with pytest.raises(NonRadialBase):
        load_feeder(d)


def test_unknown_critical_bus_rejected():
    d = f13_dict()
    d["critical"].append("99")
    with pytest.raises(SchemaError):
        load_feeder(d)


def test_switch_line_cannot_be_outaged():
    m = load_feeder("f13")
    with pytest.raises(SchemaError):
        Contingency.of(m, ["S12"])


# ---- power flow --------------------------------------------------------------

def test_two_bus_closed_form():
    edges = [(0, 1, 0.01, 0.01)]
    m = small_feeder(edges, [0, 0.5], [0, 0.2])
    v = solve_power_flow(m, m.in_service(m.default_switch_states()))
    assert v[1] == pytest.approx(np.sqrt(1 - 2 * (0.01 * 0.5 + 0.01 * 0.2)), abs=1e-12)
    assert v[1] == pytest.approx(0.99298, abs=5e-6)
    exact = exact_distflow(edges, [0, 0.5], [0, 0.2])
    assert abs(v[1] - exact[1]) / exact[1] < 0.005


def test_zero_load_is_flat():
    m = load_feeder("f13")
    z = np.zeros(m.n_buses)
    v = solve_power_flow(m, m.in_service(m.default_switch_states()), z, z)
    np.testing.assert_array_equal(v, np.ones(m.n_buses))


def test_doubling_loads_doubles_squared_drop():
    m = load_feeder("f13")
    mask = m.in_service(m.default_switch_states())
    v1 = solve_power_flow(m, mask)
    v2 = solve_power_flow(m, mask, 2 * m.p_load, 2 * m.q_load)
    np.testing.assert_allclose((1 - v2 ** 2) / 2, 2 * (1 - v1 ** 2) / 2, rtol=0, atol=1e-14)


def test_cycle_raises_nonradial_island():
    m = load_feeder("f13")
    with pytest.raises(NonRadialIsland):
        solve_power_flow(m, m.in_service([True, True, True, False]))


def test_de_energized_bus_reads_zero():
    m = load_feeder("f13")
    c = Contingency.of(m, ["L3"])
    v = solve_power_flow(m, m.in_service(m.default_switch_states(), c.outaged_lines))
    assert v[m.bus_index["3"]] == 0.0


@st.composite
def radial_trees(draw):
    n = draw(st.integers(2, 6))
    edges = []
    for b in range(1, n):
        parent = draw(st.integers(0, b - 1))
        r = draw(st.floats(0.001, 0.03))
        x = draw(st.floats(0.001, 0.03))
        edges.append((parent, b, r, x))
    p = [0.0] + [draw(st.floats(0.0, 0.3)) for _ in range(n - 1)]
    q = [0.0] + [draw(st.floats(0.0, 0.15)) for _ in range(n - 1)]
    return edges, p, q


@settings(max_examples=200, deadline=None)
@given(radial_trees())
def test_lindistflow_within_half_percent_of_exact(tree):
    edges, p, q = tree
    m = small_feeder(edges, p, q)
    v = solve_power_flow(m, m.in_service(m.default_switch_states()))
    exact = exact_distflow(edges, p, q)
    assert np.max(np.abs(v - exact) / exact) < 0.005


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.floats(0.0, 0.2))
def test_raising_one_load_never_raises_a_voltage(bus, extra):
    m = load_feeder("f13")
    mask = m.in_service(m.default_switch_states())
    p2, q2 = m.p_load.copy(), m.q_load.copy()
    p2[bus] += extra
    q2[bus] += extra / 2
    v1 = solve_power_flow(m, mask)
    v2 = solve_power_flow(m, mask, p2, q2)
    assert np.all(v2 <= v1 + 1e-15)


# ---- radiality ---------------------------------------------------------------

def test_radiality_tree_and_cycle():
    tree = small_feeder([(0, 1, .01, .01), (1, 2, .01, .01), (1, 3, .01, .01), (3, 4, .01, .01)],
                        np.zeros(5), np.zeros(5))
    assert check_radiality(tree, np.ones(4, bool)).radial
    cyc = small_feeder([(0, 1, .01, .01), (1, 2, .01, .01), (2, 3, .01, .01), (3, 4, .01, .01),
                        (4, 0, .01, .01)], np.zeros(5), np.zeros(5))
    assert not check_radiality(cyc, np.ones(5, bool)).radial


def test_isolated_bus_reported_de_energized():
    m = small_feeder([(0, 1, .01, .01), (1, 2, .01, .01), (2, 3, .01, .01), (3, 4, .01, .01)],
                     np.zeros(5), np.zeros(5))
    mask = np.array([True, True, True, False])
    rep = check_radiality(m, mask)
    assert rep.radial
    assert rep.de_energized_buses == [4]


# ---- unrestored count -------------------------------------------------------------

def test_count_unrestored_examples():
    assert count_unrestored([1.0, 1.0, 1.0], (0.95, 1.05)) == 0
    assert count_unrestored([1.0, 0.0, 1.0], (0.95, 1.05)) == 1
    assert count_unrestored([0.95, 1.05], (0.95, 1.05)) == 0
    assert count_unrestored([0.9499, 1.0501], (0.95, 1.05)) == 2


# ---- environment ---------------------------------------------------------------

def test_reset_severed_critical_reads_zero():
    env = FeederEnv("f13")
    r = env.reset(seed=0, contingency=["L3"], profile="nominal")
    assert r.obs[0] == 0.0 and r.info["n_res"] >= 1


def test_reset_without_contingency_is_trivially_done():
    env = FeederEnv("f13")
    r = env.reset(seed=0, contingency=[], profile="nominal")
    assert r.info["n_res"] == 0 and r.done


def test_reset_deterministic():
    a, b = FeederEnv("f13"), FeederEnv("f13")
    np.testing.assert_array_equal(a.reset(seed=17).obs, b.reset(seed=17).obs)
    assert a.profile == b.profile and a.contingency == b.contingency


def test_step_reward_values():
    assert step_reward(0) == 20.0
    assert step_reward(3) == -3.0


def test_restoring_toggle_gives_goal_reward():
    env = FeederEnv("f13")
    env.reset(seed=0, contingency=["L3"], profile="nominal")
    # bus 3 is fed back through the 4-8 tie
    r = env.step(2)
    assert r.reward == 20.0 and r.done and r.info["goal_reached"]


def test_loop_closing_toggle_rejected():
    env = FeederEnv("f13")
    r0 = env.reset(seed=0, contingency=["L9"], profile="nominal")
    before = env.switch_states.copy()
    # closing the 4-8 tie with both trunk sectionalizers closed would form a loop
    r = env.step(2)
    assert r.info["rejected_nonradial"]
    np.testing.assert_array_equal(env.switch_states, before)
    assert r.reward == -r0.info["n_res"]


def test_step_out_of_range():
    env = FeederEnv("f13")
    env.reset(seed=0, contingency=["L3"])
    with pytest.raises(OutOfRange):
        env.step(4)


def test_effective_contingencies_leave_a_critical_unrestored():
    m = load_feeder("f13")
    conts = effective_contingencies(m)
    assert conts
    for c in conts:
        v = solve_power_flow(m, m.in_service(m.default_switch_states(), c.outaged_lines))
        assert count_unrestored(v[m.critical], m.v_bounds) > 0


def test_f13_every_single_outage_restorable():
    m = load_feeder("f13")
    for li in range(len(m.lines)):
        if li in m.switch_lines:
            continue
        assert brute_force_restorable(m, (li,)), m.lines[li].id


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.integers(0, 3), min_size=1, max_size=12))
def test_random_episodes_keep_radiality_and_reward_range(seed, actions):
    env = FeederEnv("f13")
    env.reset(seed=seed)
    n_crit = len(env.model.critical)
    for a in actions:
        if not env.active:
            break
        r = env.step(a)
        assert check_radiality(env.model, env.in_service()).radial
        assert r.reward == 20.0 or r.reward in [-k for k in range(1, n_crit + 1)]
        assert (r.reward == 20.0) == r.info["goal_reached"]
        energized = r.obs[r.obs > 0]
        assert np.all((energized > 0) & (energized < 2))


def test_profile_sampling_range():
    m = load_feeder("f13")
    prof = LoadProfile.sample(m, np.random.default_rng(0))
    assert all(0.7 <= s <= 1.2 for s in prof.scaling)
