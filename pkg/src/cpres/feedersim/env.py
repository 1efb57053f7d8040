"""Feeder reconfiguration MDP: toggle sectionalizing switches to restore critical loads."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import OutOfRange
from ..simcore import Env, MdpSpec, StepResult, as_generator
from .model import Contingency, FeederModel, LoadProfile, load_feeder
from .powerflow import check_radiality, count_unrestored, solve_power_flow

GOAL_REWARD = 20.0


def step_reward(n_res: int) -> float:
    return GOAL_REWARD if n_res == 0 else -1.0 * n_res


@dataclass(frozen=True)
class FeederConfig:
    max_steps: int = 30
    gamma: float = 0.99
    profile_range: tuple[float, float] = (0.7, 1.2)
    contingencies: tuple[tuple, ...] | None = None   # line ids; None -> effective N-1 set


def effective_contingencies(model: FeederModel, k: int = 1) -> list[Contingency]:
    """Single-line outages (k=1) that leave at least one critical bus unrestored at nominal load."""
    if k != 1:
        raise ValueError("only k=1 enumeration is provided")
    out = []
    base = model.default_switch_states()
    for li, ln in enumerate(model.lines):
        if li in model.switch_lines:
            continue
        mask = model.in_service(base, (li,))
        v = solve_power_flow(model, mask)
        if count_unrestored(v[model.critical], model.v_bounds) > 0:
            out.append(Contingency((li,)))
    return out


class FeederEnv(Env):
    """Observation: critical-bus voltage magnitudes (0 when de-energized).

    Action: index of the switch to toggle. A toggle that would leave the
    energized island non-radial is rejected and the state is left unchanged.
    """

    env_id = "feedersim"

    def __init__(self, feeder="f13", config: FeederConfig | None = None):
        super().__init__()
        self.model: FeederModel = load_feeder(feeder)
        self.config = config or FeederConfig()
        if self.config.contingencies is None:
            self.contingencies = effective_contingencies(self.model)
        else:
            self.contingencies = [Contingency.of(self.model, c) for c in self.config.contingencies]
        self.spec = MdpSpec(
            obs_dim=len(self.model.critical),
            action_dims=(self.model.n_sw,),
            gamma=self.config.gamma,
            max_steps=self.config.max_steps,
        )
        self.contingency = Contingency()
        self.profile = LoadProfile.nominal(self.model)
        self.switch_states = self.model.default_switch_states()
        self.voltages = np.ones(self.model.n_buses)
        self._p = self.model.p_load
        self._q = self.model.q_load

    def describe(self) -> dict:
        d = super().describe()
        d.update(feeder=self.model.name, n_sw=self.model.n_sw,
                 contingencies=[list(c.outaged_lines) for c in self.contingencies])
        return d

    # ---- state -------------------------------------------------------------
    def in_service(self, switch_states=None) -> np.ndarray:
        states = self.switch_states if switch_states is None else switch_states
        return self.model.in_service(states, self.contingency.outaged_lines)

    def solve(self, switch_states=None) -> np.ndarray:
        return solve_power_flow(self.model, self.in_service(switch_states), self._p, self._q)

    def critical_voltages(self, voltages=None) -> np.ndarray:
        v = self.voltages if voltages is None else voltages
        return v[self.model.critical].copy()

    @property
    def n_res(self) -> int:
        return count_unrestored(self.critical_voltages(), self.model.v_bounds)

    def toggle_allowed(self, switch: int, switch_states=None) -> bool:
        states = np.array(self.switch_states if switch_states is None else switch_states)
        states[switch] = not states[switch]
        return check_radiality(self.model, self.in_service(states)).radial

    def apply_toggle(self, switch: int) -> bool:
        """Toggle ``switch`` if radiality is preserved; returns whether it was applied."""
        if not 0 <= switch < self.model.n_sw:
            raise OutOfRange(f"switch {switch} out of range")
        if not self.toggle_allowed(switch):
            return False
        self.switch_states[switch] = not self.switch_states[switch]
        return True

    # ---- episode -----------------------------------------------------------
    def reset(self, seed=None, contingency=None, profile=None) -> StepResult:
        self.t = 0
        rng = as_generator(0 if seed is None else seed)
        if contingency is None:
            if self.contingencies:
                contingency = self.contingencies[int(rng.integers(len(self.contingencies)))]
            else:
                contingency = Contingency()
        elif not isinstance(contingency, Contingency):
            contingency = Contingency.of(self.model, contingency)
        if profile is None:
            profile = LoadProfile.sample(self.model, rng, *self.config.profile_range)
        elif profile == "nominal":
            profile = LoadProfile.nominal(self.model)
        self.contingency = contingency
        self.profile = profile
        scale = np.asarray(profile.scaling)
        self._p = self.model.p_load * scale
        self._q = self.model.q_load * scale
        self.switch_states = self.model.default_switch_states()
        self.voltages = self.solve()
        n_res = self.n_res
        done = n_res == 0
        self._active = not done
        return StepResult(self.critical_voltages(), 0.0, done,
                          {"n_res": n_res, "goal_reached": done, "truncated": False,
                           "contingency": [self.model.lines[i].id for i in contingency.outaged_lines]})

    def _reset(self, seed):  # pragma: no cover - reset is overridden
        raise NotImplementedError

    def resolve(self):
        self.voltages = self.solve()
        return self.n_res

    def _step(self, action: int) -> StepResult:
        applied = self.apply_toggle(action)
        n_res = self.resolve()
        info = {"n_res": n_res, "goal_reached": n_res == 0, "rejected_nonradial": not applied,
                "switch_states": self.switch_states.astype(int).tolist()}
        return StepResult(self.critical_voltages(), step_reward(n_res), n_res == 0, info)
