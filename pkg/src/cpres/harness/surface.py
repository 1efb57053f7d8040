"""Export the learned reward f(s, a) over a state axis x action axis grid."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..cpenv import CyberPhysicalEnv
from ..feedersim import FeederEnv, LoadProfile, solve_power_flow
from ..learn.reward import RewardNet
from ..netsim import NetSimEnv


@dataclass
class RewardSurface:
    """``values[i, j]`` = f(state_i, action_j)."""

    state_axis: dict        # {"name", "values"}
    action_axis: dict       # {"name", "values"}
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (len(self.state_axis["values"]), len(self.action_axis["values"]))
        if self.values.shape != shape:
            raise ValueError(f"grid shape {self.values.shape} != axes {shape}")

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def argmax_actions(self) -> list:
        acts = self.action_axis["values"]
        return [acts[j] for j in np.argmax(self.values, axis=1)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{self.state_axis['name']}\\{self.action_axis['name']}", *self.action_axis["values"]])
        for s, row in zip(self.state_axis["values"], self.values):
            w.writerow([s, *[repr(float(v)) for v in row]])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {"state_axis": self.state_axis, "action_axis": self.action_axis,
                "shape": list(self.values.shape), **self.meta}

    def save(self, stem) -> tuple[Path, Path]:
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        csv_path = stem.with_suffix(".csv")
        json_path = stem.with_suffix(".json")
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True))
        return csv_path, json_path


def _grid(net: RewardNet, states: np.ndarray, actions) -> np.ndarray:
    n_s, n_a = len(states), len(actions)
    obs = np.repeat(states, n_a, axis=0)
    acts = np.tile(np.asarray(actions, dtype=np.int64), n_s)
    if net.mode == "state_only":
        return net(obs).reshape(n_s, n_a)
    return net(obs, acts).reshape(n_s, n_a)


def export_reward_surface(net: RewardNet, baseline, state_index: int, state_values, actions,
                          state_name: str = "state", action_name: str = "action", meta=None) -> RewardSurface:
    """Sweep one observation component of ``baseline`` against a list of flat actions."""
    baseline = np.asarray(baseline, dtype=float)
    if not 0 <= state_index < len(baseline):
        raise IndexError(f"state index {state_index} outside observation of length {len(baseline)}")
    states = np.repeat(baseline[None, :], len(state_values), axis=0)
    states[:, state_index] = state_values
    vals = _grid(net, states, actions)
    m = {"baseline": baseline.tolist(), "state_index": state_index, **(meta or {})}
    return RewardSurface({"name": state_name, "values": [float(v) for v in state_values]},
                         {"name": action_name, "values": [int(a) for a in actions]}, vals, m)


def rerouting_surface(net: RewardNet, env: NetSimEnv, router: str = "R3", seed: int = 0,
                      drop_values=None, actions=None) -> RewardSurface:
    """f against the drop rate observed at ``router`` and the first encoded actions.

    Baseline: the observation right after a reset with ``router`` compromised.
    Actions default to 0..8, i.e. the first two factors with every later factor at 0.
    """
    base = env.reset(seed=seed, compromised=router).obs
    idx = env.net.index[router]
    drops = np.round(np.arange(0, 11) / 10, 10) if drop_values is None else np.asarray(drop_values)
    acts = list(range(min(9, env.spec.n_actions))) if actions is None else list(actions)
    return export_reward_surface(net, base, idx, drops, acts, f"drop_rate[{router}]", "encoded_action",
                                 {"kind": "rerouting", "router": router, "seed": seed})


def feeder_baseline_voltages(env: FeederEnv) -> np.ndarray:
    """Critical-bus voltages of the intact feeder at nominal load."""
    model = env.model
    v = solve_power_flow(model, model.in_service(model.default_switch_states(), ()),
                         model.p_load * np.asarray(LoadProfile.nominal(model).scaling),
                         model.q_load * np.asarray(LoadProfile.nominal(model).scaling))
    return v[model.critical]


def feeder_surface(net: RewardNet, env: FeederEnv) -> RewardSurface:
    """f against the number of restored critical buses and the selected switch.

    With k restored, the first k critical buses take their intact-feeder
    voltage at nominal load and the rest read 0 (de-energized).
    """
    v0 = feeder_baseline_voltages(env)
    n_crit = len(v0)
    states = np.zeros((n_crit + 1, n_crit))
    for k in range(n_crit + 1):
        states[k, :k] = v0[:k]
    acts = list(range(env.model.n_sw))
    vals = _grid(net, states, acts)
    return RewardSurface({"name": "restored_critical", "values": list(range(n_crit + 1))},
                         {"name": "switch", "values": acts}, vals,
                         {"kind": "feeder", "baseline_voltages": v0.tolist(), "states": states.tolist()})


def cyberphysical_surface(net: RewardNet, env: CyberPhysicalEnv, router: str = "R3", seed: int = 0,
                          cyber_actions=None) -> RewardSurface:
    """f against the cyber encoded action and the switch index at a reset state."""
    base = env.reset(seed=seed, compromised=router).obs
    cyb = list(range(env.cyber.spec.n_actions)) if cyber_actions is None else list(cyber_actions)
    n_sw = env.phys.model.n_sw
    rows = []
    for c in cyb:
        acts = [env.join_action(c, s) for s in range(n_sw)]
        rows.append(_grid(net, base[None, :], acts)[0])
    return RewardSurface({"name": "cyber_action", "values": cyb}, {"name": "switch", "values": list(range(n_sw))},
                         np.asarray(rows), {"kind": "cyberphysical", "router": router, "seed": seed,
                                            "baseline": base.tolist()})


def surface_for(net: RewardNet, env) -> RewardSurface:
    if isinstance(env, CyberPhysicalEnv):
        return cyberphysical_surface(net, env)
    if isinstance(env, NetSimEnv):
        return rerouting_surface(net, env)
    if isinstance(env, FeederEnv):
        return feeder_surface(net, env)
    raise TypeError(f"no surface preset for {type(env).__name__}")
