"""Rerouting MDP over the packet network under a DoS attack."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..simcore import Env, MdpSpec, StepResult, as_generator, decode_action
from .network import Network, build_network
from .topology import AttackSpec


@dataclass(frozen=True)
class CyberGoalSpec:
    n_g: int = 5

    def __post_init__(self):
        if self.n_g < 1:
            raise ValueError("n_g must be >= 1")


@dataclass(frozen=True)
class NetConfig:
    tick: float = 0.1               # seconds between DC packets
    ticks_per_step: int = 10
    warmup_ticks: int = 10
    max_steps: int = 50
    gamma: float = 0.99
    latency_penalty: float = 0.0    # alpha in reward -= alpha * mean latency (s)
    ttl: int | None = None


class NetSimEnv(Env):
    """Rerouting environment.

    Observation is ``[drop rate per router || utilization per channel]``.
    Reward is the number of data packets that reached the DA during the step.
    The episode ends once every DC has delivered ``n_g`` packets.
    """

    env_id = "netsim"

    def __init__(self, topology="N8", attack: AttackSpec | None = None,
                 goal: CyberGoalSpec | None = None, config: NetConfig | None = None):
        super().__init__()
        self.config = config or NetConfig()
        self.net: Network = build_network(topology, tick=self.config.tick, ttl=self.config.ttl)
        topo = self.net.spec
        self.attack = attack or topo.attack or AttackSpec(())
        self.goal = goal or CyberGoalSpec()
        n_ctrl, n_inf = len(topo.controllable), topo.n_inf
        if topo.action_model == "single":
            dims = (n_ctrl, n_inf)
        else:
            dims = (n_inf,) * n_ctrl
        self.spec = MdpSpec(
            obs_dim=self.net.n_routers + self.net.n_channels,
            action_dims=dims,
            gamma=self.config.gamma,
            max_steps=self.config.max_steps,
        )
        self.compromised: str | None = None
        self.last_stats = None

    @property
    def step_duration(self) -> float:
        return self.config.tick * self.config.ticks_per_step

    def describe(self) -> dict:
        d = super().describe()
        d.update(topology=self.net.spec.name, n_g=self.goal.n_g,
                 candidates=list(self.attack.candidates), drop_prob=self.attack.drop_prob)
        return d

    # ---- action handling -------------------------------------------------
    def apply_action(self, factors):
        """Apply decoded per-factor indices to the routing table."""
        net = self.net
        ctrl = net.spec.controllable
        if net.spec.action_model == "single":
            net.set_route(ctrl[factors[0]], factors[1])
        else:
            for rid, idx in zip(ctrl, factors):
                net.set_route(rid, idx)

    def current_action_factors(self) -> tuple[int, ...]:
        """Factors that re-assert the current routes (an identity action)."""
        ctrl = self.net.spec.controllable
        if self.net.spec.action_model == "single":
            return (0, self.net.interface_index(ctrl[0]))
        return tuple(self.net.interface_index(r) for r in ctrl)

    # ---- episode -----------------------------------------------------------
    def _reset(self, seed, compromised: str | None = None) -> StepResult:
        net = self.net
        net.rng = as_generator(0 if seed is None else seed)
        net.flush()
        net.events.clock = 0.0      # episodes replay bit-identically regardless of history
        net.reset_routes()
        net.clear_dos()
        if compromised is None and self.attack.candidates:
            compromised = self.attack.candidates[int(net.rng.integers(len(self.attack.candidates)))]
        self.compromised = compromised
        if compromised is not None:
            net.inject_dos(compromised, self.attack.drop_prob)
        if self.config.warmup_ticks > 0:
            net.run_window(self.config.tick * self.config.warmup_ticks)
        obs = net.measure()
        net.flush()
        net.zero_counters()
        return StepResult(obs, 0.0, False, {"compromised": compromised,
                                            "received_per_dc": list(net.received_per_dc)})

    def reset(self, seed=None, compromised: str | None = None) -> StepResult:
        self.t = 0
        result = self._reset(seed, compromised)
        self._active = True
        result.info.update(goal_reached=False, truncated=False)
        return result

    def goal_reached(self) -> bool:
        return min(self.net.received_per_dc) >= self.goal.n_g

    def _step(self, action: int, before=None) -> StepResult:
        self.apply_action(decode_action(action, self.spec.action_dims))
        stats = self.net.run_window(self.step_duration, before=before)
        self.last_stats = stats
        reward = float(stats.delivered)
        if self.config.latency_penalty:
            reward -= self.config.latency_penalty * stats.mean_latency
        goal = self.goal_reached()
        info = {
            "goal_reached": goal,
            "delivered": stats.delivered,
            "received_per_dc": list(self.net.received_per_dc),
            "mean_latency": stats.mean_latency,
            "compromised": self.compromised,
        }
        return StepResult(self.net.measure(), reward, goal, info)
