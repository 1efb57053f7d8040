"""Factored categorical policies over MultiDiscrete actions, and state-value nets."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from ..simcore import as_generator
from .mlp import MlpArch, MlpParams, mlp_backward, mlp_forward


def factor_indices(acts, dims) -> np.ndarray:
    """Vectorized decode of flat actions into per-factor indices (first factor fastest)."""
    acts = np.asarray(acts, dtype=np.int64)
    out = np.empty(acts.shape + (len(dims),), dtype=np.int64)
    for k, d in enumerate(dims):
        out[..., k] = acts % d
        acts = acts // d
    return out


def flat_actions(idx, dims) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    flat = np.zeros(idx.shape[:-1], dtype=np.int64)
    stride = 1
    for k, d in enumerate(dims):
        flat += idx[..., k] * stride
        stride *= d
    return flat


def one_hot_factors(acts, dims) -> np.ndarray:
    """Concatenated per-factor one-hot encoding, shape (batch, sum(dims))."""
    idx = factor_indices(np.atleast_1d(acts), dims)
    out = np.zeros((idx.shape[0], int(sum(dims))))
    off = 0
    rows = np.arange(idx.shape[0])
    for k, d in enumerate(dims):
        out[rows, off + idx[:, k]] = 1.0
        off += d
    return out


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class PolicyNet:
    """MLP trunk whose output is split into one logit block per action factor."""

    def __init__(self, obs_dim: int, action_dims, hidden=(32, 32), rng=0, activation="tanh",
                 params: MlpParams | None = None):
        self.obs_dim = int(obs_dim)
        self.action_dims = tuple(int(d) for d in action_dims)
        arch = MlpArch(self.obs_dim, tuple(hidden), int(sum(self.action_dims)), activation)
        self.params = params if params is not None else MlpParams.init(arch, as_generator(rng), out_scale=0.01)
        self._splits = np.cumsum(self.action_dims)[:-1]

    @property
    def n_actions(self) -> int:
        return int(np.prod(self.action_dims))

    def copy(self) -> "PolicyNet":
        return PolicyNet(self.obs_dim, self.action_dims, params=self.params.copy())

    # ---- distributions -----------------------------------------------------
    def logits(self, obs, return_cache=False):
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        if obs.shape[1] != self.obs_dim:
            raise ShapeMismatch(f"obs dim {obs.shape[1]} != {self.obs_dim}")
        return mlp_forward(self.params, obs, return_cache=return_cache)

    def log_probs_per_factor(self, logits) -> list[np.ndarray]:
        return [_log_softmax(z) for z in np.split(logits, self._splits, axis=1)]

    def probs(self, obs) -> list[np.ndarray]:
        return [np.exp(lp) for lp in self.log_probs_per_factor(self.logits(obs))]

    def log_prob(self, obs, acts) -> np.ndarray:
        """log pi(a|s) of flat actions, summed over factors."""
        lps = self.log_probs_per_factor(self.logits(obs))
        idx = factor_indices(np.atleast_1d(acts), self.action_dims)
        rows = np.arange(idx.shape[0])
        return sum(lp[rows, idx[:, k]] for k, lp in enumerate(lps))

    def entropy(self, obs) -> np.ndarray:
        lps = self.log_probs_per_factor(self.logits(obs))
        return sum(-(np.exp(lp) * lp).sum(axis=1) for lp in lps)

    def sample(self, obs, rng) -> np.ndarray:
        """Sample flat actions; returns (actions, log-probs)."""
        lps = self.log_probs_per_factor(self.logits(obs))
        n = lps[0].shape[0]
        idx = np.empty((n, len(lps)), dtype=np.int64)
        u = rng.random((n, len(lps)))
        for k, lp in enumerate(lps):
            c = np.cumsum(np.exp(lp), axis=1)
            idx[:, k] = np.minimum((u[:, [k]] > c).sum(axis=1), lp.shape[1] - 1)
        rows = np.arange(n)
        logp = sum(lp[rows, idx[:, k]] for k, lp in enumerate(lps))
        return flat_actions(idx, self.action_dims), logp

    def greedy(self, obs) -> np.ndarray:
        lps = self.log_probs_per_factor(self.logits(obs))
        idx = np.stack([lp.argmax(axis=1) for lp in lps], axis=1)
        return flat_actions(idx, self.action_dims)

    def actor(self, greedy: bool = True, rng=None):
        """Single-observation callable ``obs -> flat action``."""
        if greedy:
            return lambda obs: int(self.greedy(obs)[0])
        gen = as_generator(0 if rng is None else rng)
        return lambda obs: int(self.sample(obs, gen)[0][0])

    # ---- gradients ---------------------------------------------------------
    def backward(self, cache, g_logits):
        gw, gb, _ = mlp_backward(self.params, cache, g_logits)
        return _interleave(gw, gb)

    def logit_grads(self, logits, acts, coef_logp, coef_ent=None) -> np.ndarray:
        """d/dlogits of ``sum(coef_logp * log pi(a|s)) + sum(coef_ent * H(pi(.|s)))``."""
        lps = self.log_probs_per_factor(logits)
        idx = factor_indices(np.atleast_1d(acts), self.action_dims)
        rows = np.arange(idx.shape[0])
        out = []
        for k, lp in enumerate(lps):
            p = np.exp(lp)
            g = -p
            g[rows, idx[:, k]] += 1.0
            g *= coef_logp[:, None]
            if coef_ent is not None:
                h = -(p * lp).sum(axis=1, keepdims=True)
                g += coef_ent[:, None] * (-p * (lp + h))
            out.append(g)
        return np.concatenate(out, axis=1)

    def to_dict(self) -> dict:
        return {"kind": "policy", "action_dims": list(self.action_dims), "arch": self.params.arch.to_dict(),
                "params": self.params.flat().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyNet":
        arch = MlpArch.from_dict(d["arch"])
        params = MlpParams.zeros(arch)
        params.set_flat(np.asarray(d["params"], dtype=float))
        return cls(arch.in_dim, d["action_dims"], arch.hidden, activation=arch.activation, params=params)


class ValueNet:
    def __init__(self, obs_dim: int, hidden=(32, 32), rng=0, activation="tanh", params: MlpParams | None = None):
        arch = MlpArch(int(obs_dim), tuple(hidden), 1, activation)
        self.params = params if params is not None else MlpParams.init(arch, as_generator(rng), out_scale=1.0)

    def __call__(self, obs) -> np.ndarray:
        return mlp_forward(self.params, np.atleast_2d(obs))[:, 0]

    def loss_and_grads(self, obs, returns):
        out, cache = mlp_forward(self.params, np.atleast_2d(obs), return_cache=True)
        err = out[:, 0] - returns
        loss = 0.5 * float(np.mean(err ** 2))
        gw, gb, _ = mlp_backward(self.params, cache, (err / len(err))[:, None])
        return loss, _interleave(gw, gb)

    def to_dict(self) -> dict:
        return {"kind": "value", "arch": self.params.arch.to_dict(), "params": self.params.flat().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ValueNet":
        arch = MlpArch.from_dict(d["arch"])
        params = MlpParams.zeros(arch)
        params.set_flat(np.asarray(d["params"], dtype=float))
        return cls(arch.in_dim, arch.hidden, activation=arch.activation, params=params)


def _interleave(gw, gb):
    out = []
    for w, b in zip(gw, gb):
        out += [w, b]
    return out


def entropy_estimate(policy: PolicyNet, states) -> float:
    """Mean over states of the summed per-factor categorical entropies."""
    states = np.atleast_2d(states)
    if len(states) == 0:
        raise ValueError("state batch is empty")
    return float(np.mean(policy.entropy(states)))
