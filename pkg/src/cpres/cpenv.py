"""Coupled cyber-physical restoration MDP.

Switch commands chosen by the agent are sent as packets from the zone's data
concentrator through the (attacked) network. A toggle only takes physical
effect when its command packet reaches the DA within the same step.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import UnknownCommand, UnknownSwitch, UnknownZone
from .feedersim import FeederConfig, FeederEnv
from .feedersim.env import step_reward
from .netsim import CyberGoalSpec, NetConfig, NetSimEnv
from .simcore import Env, MdpSpec, RngStream, StepResult, decode_action, encode_action


def combined_reward(r_c: float, r_p: float, g_c: bool, g_p: bool) -> float:
    """Reward case table for the coupled task.

    Only the physical reward counts once the cyber goal alone is met and only
    the cyber reward once the physical goal alone is met. Before either goal is
    met both signals are summed.
    """
    if g_c and not g_p:
        return r_p
    if g_p and not g_c:
        return r_c
    return r_c + r_p


@dataclass
class SwitchCommand:
    cmd_id: int
    switch: int
    zone: int


@dataclass
class ThreatNotice:
    cmd_id: int
    status: str      # "delivered" | "dropped"


class CouplingQueues:
    """FIFO queues between the physical side (commands) and cyber side (notices)."""

    def __init__(self):
        self.phy_to_cyb: deque[SwitchCommand] = deque()
        self.cyb_to_phy: deque[ThreatNotice] = deque()
        self.pending: dict[int, SwitchCommand] = {}

    def clear(self):
        self.phy_to_cyb.clear()
        self.cyb_to_phy.clear()
        self.pending.clear()


@dataclass(frozen=True)
class CombinedConfig:
    max_steps: int = 50
    gamma: float = 0.99


class CyberPhysicalEnv(Env):
    """Observation ``[network obs || critical voltages]``; action factors
    ``network dims ++ (n_switches,)``."""

    env_id = "cpenv"

    def __init__(self, topology="N6", feeder="f13", *, attack=None, goal: CyberGoalSpec | None = None,
                 net_config: NetConfig | None = None, feeder_config: FeederConfig | None = None,
                 config: CombinedConfig | None = None):
        super().__init__()
        self.config = config or CombinedConfig()
        big = 10**9
        self.cyber = NetSimEnv(topology, attack=attack, goal=goal,
                               config=net_config or NetConfig(max_steps=big))
        self.phys = FeederEnv(feeder, config=feeder_config or FeederConfig(max_steps=big))
        self.zone_router = {dc.zone: dc.router for dc in self.cyber.net.spec.dcs}
        self.n_cyber = len(self.cyber.spec.action_dims)
        self.spec = MdpSpec(
            obs_dim=self.cyber.spec.obs_dim + self.phys.spec.obs_dim,
            action_dims=self.cyber.spec.action_dims + self.phys.spec.action_dims,
            gamma=self.config.gamma,
            max_steps=self.config.max_steps,
        )
        self.queues = CouplingQueues()
        self.g_c = False
        self.g_p = False

    def describe(self) -> dict:
        d = super().describe()
        d.update(cyber=self.cyber.describe(), phys=self.phys.describe())
        return d

    def split_action(self, action: int) -> tuple[int, int]:
        factors = decode_action(action, self.spec.action_dims)
        cyber = encode_action(factors[: self.n_cyber], self.cyber.spec.action_dims)
        return cyber, factors[self.n_cyber]

    def join_action(self, cyber_action: int, switch: int) -> int:
        factors = decode_action(cyber_action, self.cyber.spec.action_dims) + (int(switch),)
        return encode_action(factors, self.spec.action_dims)

    # ---- coupling surface ----------------------------------------------------
    def queue_phy_to_cyb(self, switch: int, zone: int | None = None) -> SwitchCommand:
        """Send a switch command packet from the data concentrator of ``zone``."""
        if not 0 <= switch < self.phys.model.n_sw:
            raise UnknownSwitch(switch)
        if zone is None:
            zone = self.phys.model.switches[switch].zone
        if zone not in self.zone_router:
            raise UnknownZone(zone)
        cmd_id = self.cyber.net.send_command(self.zone_router[zone])
        cmd = SwitchCommand(cmd_id, int(switch), zone)
        self.queues.phy_to_cyb.append(cmd)
        self.queues.pending[cmd_id] = cmd
        return cmd

    def queue_cyb_to_phy(self, status: str, cmd_id: int) -> bool:
        """Apply the physical effect of a command outcome; returns whether a toggle happened."""
        cmd = self.queues.pending.pop(cmd_id, None)
        if cmd is None:
            raise UnknownCommand(cmd_id)
        self.queues.cyb_to_phy.append(ThreatNotice(cmd_id, status))
        applied = False
        if status == "delivered":
            applied = self.phys.apply_toggle(cmd.switch)
            self.phys.resolve()
        return applied

    def _collect_notices(self) -> list[ThreatNotice]:
        """Resolve every command sent this step (undelivered ones count as dropped)."""
        net = self.cyber.net
        notices = []
        while self.queues.phy_to_cyb:
            cmd = self.queues.phy_to_cyb.popleft()
            status = net.command_outcome.pop(cmd.cmd_id, None)
            if status is None:
                net._resolve_command(cmd.cmd_id, "dropped")
                net.command_outcome.pop(cmd.cmd_id, None)
                status = "dropped"
            notices.append(ThreatNotice(cmd.cmd_id, status))
        return notices

    # ---- episode -------------------------------------------------------------
    def reset(self, seed=None, compromised=None, contingency=None, profile=None) -> StepResult:
        self.t = 0
        base = RngStream(0 if seed is None else int(seed))
        self.queues.clear()
        rc = self.cyber.reset(seed=base.child(0), compromised=compromised)
        rp = self.phys.reset(seed=base.child(1), contingency=contingency, profile=profile)
        self.g_c = False
        self.g_p = rp.info["n_res"] == 0
        self._active = True
        obs = np.concatenate([rc.obs, rp.obs])
        return StepResult(obs, 0.0, False, {"g_c": self.g_c, "g_p": self.g_p, "goal_reached": False,
                                            "truncated": False, "compromised": rc.info["compromised"],
                                            "contingency": rp.info["contingency"], "n_res": rp.info["n_res"]})

    def _step(self, action: int) -> StepResult:
        cyber_action, switch = self.split_action(action)
        switches_before = self.phys.switch_states.copy()
        sent = []
        rc = self.cyber._step(cyber_action, before=lambda: sent.append(self.queue_phy_to_cyb(switch)))
        notices = self._collect_notices()
        delivered, dropped, applied = [], [], []
        for notice in notices:
            ok = self.queue_cyb_to_phy(notice.status, notice.cmd_id)
            (delivered if notice.status == "delivered" else dropped).append(switch)
            applied.append(ok)
        n_res = self.phys.resolve()
        self.g_c = self.cyber.goal_reached()
        self.g_p = n_res == 0
        r_c = rc.reward
        r_p = step_reward(n_res)
        r_cp = combined_reward(r_c, r_p, self.g_c, self.g_p)
        done = self.g_c and self.g_p
        changed = np.flatnonzero(switches_before != self.phys.switch_states).tolist()
        info = {
            "goal_reached": done,
            "g_c": self.g_c,
            "g_p": self.g_p,
            "r_c": r_c,
            "r_p": r_p,
            "n_res": n_res,
            "switch": switch,
            "cmd_delivered": bool(delivered),
            "cmd_dropped": bool(dropped),
            "rejected_nonradial": bool(delivered) and not any(applied),
            "switches_changed": changed,
            "received_per_dc": rc.info["received_per_dc"],
            "compromised": self.cyber.compromised,
        }
        obs = np.concatenate([rc.obs, self.phys.critical_voltages()])
        return StepResult(obs, r_cp, done, info)
