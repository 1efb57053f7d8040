"""Learned reward/discriminator nets, feature expectations and the linear reward head."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ShapeMismatch
from ..simcore import as_generator
from .mlp import MlpArch, MlpParams, mlp_backward, mlp_forward
from .policy import _interleave, one_hot_factors

MODES = ("state_action", "state_only")


class RewardNet:
    """Scalar f(s, a). The action enters as per-factor one-hot blocks; ``state_only`` drops it."""

    def __init__(self, obs_dim: int, action_dims, mode: str = "state_action", hidden=(32, 32), rng=0,
                 activation="tanh", params: MlpParams | None = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.obs_dim = int(obs_dim)
        self.action_dims = tuple(int(d) for d in action_dims)
        self.mode = mode
        in_dim = self.obs_dim + (sum(self.action_dims) if mode == "state_action" else 0)
        arch = MlpArch(in_dim, tuple(hidden), 1, activation)
        self.params = params if params is not None else MlpParams.init(arch, as_generator(rng), out_scale=1.0)

    def features(self, obs, acts=None) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        if obs.shape[1] != self.obs_dim:
            raise ShapeMismatch(f"obs dim {obs.shape[1]} != {self.obs_dim}")
        if self.mode == "state_only":
            return obs
        if acts is None:
            raise ShapeMismatch("state_action reward needs actions")
        acts = np.atleast_1d(acts)
        if len(acts) != len(obs):
            raise ShapeMismatch(f"{len(acts)} actions for {len(obs)} states")
        return np.concatenate([obs, one_hot_factors(acts, self.action_dims)], axis=1)

    def __call__(self, obs, acts=None) -> np.ndarray:
        return mlp_forward(self.params, self.features(obs, acts))[:, 0]

    def forward_cache(self, obs, acts=None):
        out, cache = mlp_forward(self.params, self.features(obs, acts), return_cache=True)
        return out[:, 0], cache

    def backward(self, cache, g_out) -> list[np.ndarray]:
        gw, gb, _ = mlp_backward(self.params, cache, np.asarray(g_out, dtype=float)[:, None])
        return _interleave(gw, gb)

    def to_dict(self) -> dict:
        return {"kind": "reward", "mode": self.mode, "obs_dim": self.obs_dim, "action_dims": list(self.action_dims),
                "arch": self.params.arch.to_dict(), "params": self.params.flat().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RewardNet":
        arch = MlpArch.from_dict(d["arch"])
        params = MlpParams.zeros(arch)
        params.set_flat(np.asarray(d["params"], dtype=float))
        return cls(d["obs_dim"], d["action_dims"], d["mode"], arch.hidden, activation=arch.activation, params=params)


def reward_eval(net: RewardNet, state, action=None) -> float:
    """f(s, a) for a single state/action pair."""
    acts = None if action is None else [int(action)]
    return float(net(np.asarray(state, dtype=float)[None, :], acts)[0])


# ---------------------------------------------------------------------------
# feature expectations
# ---------------------------------------------------------------------------
def identity_features(obs) -> np.ndarray:
    return np.asarray(obs, dtype=float)


def feature_expectation(policy: Callable, env, gamma: float | None = None, n_rollouts: int = 100,
                        phi: Callable = identity_features, seed=0, tail_tol: float = 1e-6,
                        max_horizon: int | None = None) -> np.ndarray:
    """Monte-Carlo estimate of E[sum_t gamma^t phi(s_t)] over ``n_rollouts`` episodes.

    States s_0..s_T are all counted, T being the step at which the episode
    ends. Rollouts are also cut once gamma^t drops below ``tail_tol``.
    """
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    gamma = env.spec.gamma if gamma is None else float(gamma)
    if gamma <= 0:
        horizon = 1
    elif gamma < 1:
        horizon = int(math.ceil(math.log(tail_tol) / math.log(gamma)))
    else:
        horizon = env.spec.max_steps + 1
    if max_horizon is not None:
        horizon = min(horizon, max_horizon)
    seeds = np.random.SeedSequence(int(seed)).generate_state(n_rollouts, dtype=np.uint64)
    total = None
    for s in seeds:
        r = env.reset(seed=int(s))
        acc = np.asarray(phi(r.obs), dtype=float).copy()
        disc = 1.0
        for _ in range(horizon - 1):
            if r.done:
                break
            r = env.step(int(policy(r.obs)))
            disc *= gamma
            acc = acc + disc * np.asarray(phi(r.obs), dtype=float)
        total = acc if total is None else total + acc
    return total / n_rollouts


# ---------------------------------------------------------------------------
# linear reward head
# ---------------------------------------------------------------------------
@dataclass
class LinearRewardHead:
    """R(t, s) = sum_i w_i(t, s) R_i(t, s) with w(t, s) = W [t, s] + b."""

    metrics: Sequence[Callable]          # each R_i(t, s) -> float
    obs_dim: int
    weight: np.ndarray = field(default=None)   # (n_metrics, 1 + obs_dim)
    bias: np.ndarray = field(default=None)     # (n_metrics,)

    def __post_init__(self):
        n = len(self.metrics)
        if self.weight is None:
            self.weight = np.zeros((n, 1 + self.obs_dim))
        if self.bias is None:
            self.bias = np.zeros(n)
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.shape != (n, 1 + self.obs_dim) or self.bias.shape != (n,):
            raise ShapeMismatch("weight/bias shapes do not match metric count and obs_dim")

    def weights(self, t, s) -> np.ndarray:
        return self.weight @ np.concatenate([[float(t)], np.asarray(s, dtype=float)]) + self.bias

    def metric_values(self, t, s) -> np.ndarray:
        return np.array([float(m(t, s)) for m in self.metrics])

    def fit(self, ts, states, targets, ridge: float = 1e-6):
        """Least-squares fit of (W, b) so that the head reproduces ``targets``."""
        rows = []
        for t, s in zip(ts, states):
            x = np.concatenate([[float(t)], np.asarray(s, dtype=float), [1.0]])
            rows.append(np.outer(self.metric_values(t, s), x).ravel())
        a = np.asarray(rows)
        y = np.asarray(targets, dtype=float)
        coef = np.linalg.solve(a.T @ a + ridge * np.eye(a.shape[1]), a.T @ y)
        coef = coef.reshape(len(self.metrics), self.obs_dim + 2)
        self.weight = coef[:, :-1].copy()
        self.bias = coef[:, -1].copy()
        return self


def linear_reward(t, s, head: LinearRewardHead) -> float:
    return float(np.dot(head.weights(t, s), head.metric_values(t, s)))
