import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpres.cpenv import CyberPhysicalEnv, combined_reward
from cpres.feedersim import FeederEnv
from cpres.errors import UnknownCommand, UnknownSwitch, UnknownZone
from cpres.netsim import AttackSpec, NetSimEnv
from cpres.netsim.network import _ARRIVE
from cpres.simcore import RngStream

from oracles import combined_reward_table


def test_reward_case_examples():
    assert combined_reward(5.0, -2.0, True, False) == -2.0
    assert combined_reward(3.0, -1.0, False, True) == 3.0
    assert combined_reward(3.0, 20.0, True, True) == 23.0
    # before either goal both signals count
    assert combined_reward(4.0, -2.0, False, False) == 2.0


@given(st.floats(-100, 100), st.floats(-100, 100), st.booleans(), st.booleans())
def test_reward_matches_case_table(r_c, r_p, g_c, g_p):
    assert combined_reward(r_c, r_p, g_c, g_p) == combined_reward_table(r_c, r_p, g_c, g_p)


def test_spaces_concatenate():
    env = CyberPhysicalEnv("N6", "f13")
    assert env.spec.obs_dim == env.cyber.spec.obs_dim + env.phys.spec.obs_dim
    assert env.spec.action_dims == (6, 3, 4)


def test_split_join_round_trip():
    env = CyberPhysicalEnv("N6", "f13")
    for c, s in itertools.product(range(env.cyber.spec.n_actions), range(4)):
        assert env.split_action(env.join_action(c, s)) == (c, s)


def test_reset_deterministic_and_goals_false():
    a, b = CyberPhysicalEnv(), CyberPhysicalEnv()
    ra, rb = a.reset(seed=8), b.reset(seed=8)
    assert ra.info["compromised"] == rb.info["compromised"]
    assert ra.info["contingency"] == rb.info["contingency"]
    np.testing.assert_array_equal(ra.obs, rb.obs)
    assert ra.info["n_res"] > 0
    assert not ra.info["g_c"] and not ra.info["g_p"]


def test_observation_prefix_matches_standalone_network():
    env = CyberPhysicalEnv("N6", "f13")
    for seed in range(10):
        r = env.reset(seed=seed)
        alone = NetSimEnv("N6").reset(seed=RngStream(seed).child(0))
        np.testing.assert_array_equal(r.obs[: env.cyber.spec.obs_dim], alone.obs)


def test_command_through_fully_dropping_router_has_no_effect():
    env = CyberPhysicalEnv("N6", "f13", attack=AttackSpec(("R3",), 1.0))
    env.reset(seed=0, compromised="R3", contingency=["L3"], profile="nominal")
    before = env.phys.switch_states.copy()
    # cyber action 0 keeps R1 -> R3, so a zone-1 command must cross R3
    zone1_switch = next(i for i, s in enumerate(env.phys.model.switches) if s.zone == 1)
    r = env.step(env.join_action(0, zone1_switch))
    assert r.info["cmd_dropped"] and not r.info["cmd_delivered"]
    np.testing.assert_array_equal(env.phys.switch_states, before)
    assert r.info["switches_changed"] == []


def test_zone_command_sourced_at_zone_dc():
    env = CyberPhysicalEnv("N6", "f13")
    env.reset(seed=0)
    net = env.cyber.net
    net.events.clear()
    cmd = env.queue_phy_to_cyb(0, zone=1)
    (_, _, ev), = net.events._heap
    assert ev[0] == _ARRIVE and net.ids[ev[1]] == env.zone_router[1] == "R1"
    assert cmd.zone == 1


def test_unknown_zone_and_switch():
    env = CyberPhysicalEnv("N6", "f13")
    env.reset(seed=0)
    with pytest.raises(UnknownZone):
        env.queue_phy_to_cyb(0, zone=7)
    with pytest.raises(UnknownSwitch):
        env.queue_phy_to_cyb(99)


def test_two_commands_fifo():
    env = CyberPhysicalEnv("N6", "f13")
    env.reset(seed=0)
    a = env.queue_phy_to_cyb(0)
    b = env.queue_phy_to_cyb(1)
    assert [c.cmd_id for c in env.queues.phy_to_cyb] == [a.cmd_id, b.cmd_id]
    notices = env._collect_notices()
    assert [n.cmd_id for n in notices] == [a.cmd_id, b.cmd_id]


def test_delivered_restoring_toggle_matches_feeder_oracle():
    env = CyberPhysicalEnv("N6", "f13")
    env.reset(seed=0, contingency=["L3"], profile="nominal")
    n0 = env.phys.n_res
    # the standalone feeder tells us what toggling the 4-8 tie does
    ref = FeederEnv("f13")
    ref.reset(seed=0, contingency=["L3"], profile="nominal")
    expect = ref.step(2).info["n_res"]
    cmd = env.queue_phy_to_cyb(2)
    env.queue_cyb_to_phy("delivered", cmd.cmd_id)
    assert env.phys.n_res == expect <= n0


def test_dropped_notice_and_duplicate():
    env = CyberPhysicalEnv("N6", "f13")
    env.reset(seed=0, contingency=["L3"], profile="nominal")
    before = env.phys.switch_states.copy()
    cmd = env.queue_phy_to_cyb(2)
    env.queue_cyb_to_phy("dropped", cmd.cmd_id)
    np.testing.assert_array_equal(env.phys.switch_states, before)
    with pytest.raises(UnknownCommand):
        env.queue_cyb_to_phy("dropped", cmd.cmd_id)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 2**31))
def test_coupling_soundness_and_termination(seed, act_seed):
    env = CyberPhysicalEnv("N6", "f13")
    rng = np.random.default_rng(act_seed)
    env.reset(seed=seed)
    while env.active:
        before = env.phys.switch_states.copy()
        r = env.step(int(rng.integers(env.spec.n_actions)))
        changed = np.flatnonzero(before != env.phys.switch_states).tolist()
        if changed:
            assert r.info["cmd_delivered"] and changed == [r.info["switch"]]
        assert r.reward == combined_reward_table(r.info["r_c"], r.info["r_p"], r.info["g_c"], r.info["g_p"])
        assert r.info["goal_reached"] == (r.info["g_c"] and r.info["g_p"])
        assert not env.queues.pending and not env.queues.phy_to_cyb
