"""Rollout collection, generalized advantage estimation and the PPO update."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from ..errors import NonFiniteLoss
from ..simcore import as_generator
from .losses import ppo_loss
from .mlp import Adam
from .policy import PolicyNet, ValueNet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PPOConfig:
    n_steps: int = 1024
    epochs: int = 8
    minibatch: int = 128
    lr: float = 3e-4
    vf_lr: float = 1e-3
    clip: float = 0.2
    lam: float = 0.95
    gamma: float | None = None          # None -> the environment's discount
    ent_coef: float = 1e-3
    max_grad_norm: float = 0.5
    hidden: tuple[int, ...] = (32, 32)

    def to_dict(self):
        return asdict(self)


@dataclass
class RolloutBatch:
    obs: np.ndarray
    acts: np.ndarray
    logp: np.ndarray
    next_obs: np.ndarray
    env_rewards: np.ndarray
    terminal: np.ndarray      # goal reached: no bootstrap
    ends: np.ndarray          # episode boundary (terminal or truncated)
    episode_lengths: list = field(default_factory=list)
    adv: np.ndarray | None = None
    ret: np.ndarray | None = None

    def __len__(self):
        return len(self.acts)


class EpisodeSeeds:
    """Endless stream of per-episode reset seeds derived from one seed."""

    def __init__(self, seed: int, block: int = 256):
        self._ss = np.random.SeedSequence(int(seed))
        self._block = block
        self._buf: list[int] = []

    def __next__(self) -> int:
        if not self._buf:
            child = self._ss.spawn(1)[0]
            self._buf = [int(s) for s in child.generate_state(self._block, dtype=np.uint64)][::-1]
        return self._buf.pop()


class Sampler:
    """Keeps an environment mid-episode across successive rollout calls."""

    def __init__(self, env, seed: int):
        self.env = env
        self.seeds = EpisodeSeeds(seed)
        self.rng = as_generator(np.random.SeedSequence([int(seed), 1]).generate_state(1)[0])
        self.obs = None
        self.ep_len = 0
        self.steps = 0

    def _reset(self):
        while True:
            r = self.env.reset(seed=next(self.seeds))
            if not r.done:
                self.obs = r.obs
                self.ep_len = 0
                return

    def collect(self, policy: PolicyNet, n_steps: int, on_step: Callable | None = None) -> RolloutBatch:
        if self.obs is None:
            self._reset()
        d = self.env.spec.obs_dim
        obs = np.empty((n_steps, d))
        nxt = np.empty((n_steps, d))
        acts = np.empty(n_steps, dtype=np.int64)
        logp = np.empty(n_steps)
        rew = np.empty(n_steps)
        term = np.zeros(n_steps, dtype=bool)
        ends = np.zeros(n_steps, dtype=bool)
        lengths = []
        for i in range(n_steps):
            a, lp = policy.sample(self.obs, self.rng)
            a = int(a[0])
            if on_step is not None:
                on_step(self.env, self.obs, a)
            r = self.env.step(a)
            obs[i], acts[i], logp[i], nxt[i], rew[i] = self.obs, a, lp[0], r.obs, r.reward
            self.ep_len += 1
            self.steps += 1
            if r.done:
                term[i] = bool(r.info.get("goal_reached"))
                ends[i] = True
                lengths.append(self.ep_len)
                self._reset()
            else:
                self.obs = r.obs
        return RolloutBatch(obs, acts, logp, nxt, rew, term, ends, lengths)


def compute_gae(rewards, values, next_values, terminal, ends, gamma: float, lam: float,
                terminal_value: float = 0.0):
    """GAE(lambda) advantages and bootstrapped returns.

    Truncated episodes bootstrap from V(s'); goal-terminated ones from
    ``terminal_value`` (0 unless the terminal state is treated as absorbing).
    """
    n = len(rewards)
    adv = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        nv = terminal_value if terminal[t] else next_values[t]
        delta = rewards[t] + gamma * nv - values[t]
        last = delta + gamma * lam * (0.0 if ends[t] else last)
        adv[t] = last
    return adv, adv + values


class PPOLearner:
    """Policy, value net, their optimizers and the update rule."""

    def __init__(self, obs_dim, action_dims, config: PPOConfig = PPOConfig(), seed: int = 0,
                 policy: PolicyNet | None = None):
        self.config = config
        ss = np.random.SeedSequence(int(seed)).spawn(3)
        self.policy = policy or PolicyNet(obs_dim, action_dims, config.hidden, rng=as_generator(ss[0].generate_state(1)[0]))
        self.value = ValueNet(obs_dim, config.hidden, rng=as_generator(ss[1].generate_state(1)[0]))
        self.rng = as_generator(ss[2].generate_state(1)[0])
        self.opt_pi = Adam(self.policy.params.arrays(), lr=config.lr, max_grad_norm=config.max_grad_norm)
        self.opt_v = Adam(self.value.params.arrays(), lr=config.vf_lr, max_grad_norm=config.max_grad_norm)

    def discount(self, env_gamma: float) -> float:
        return self.config.gamma if self.config.gamma is not None else env_gamma

    def prepare(self, batch: RolloutBatch, rewards=None, gamma: float = 0.99, terminal_value: float = 0.0):
        rewards = batch.env_rewards if rewards is None else np.asarray(rewards, dtype=float)
        v = self.value(batch.obs)
        nv = self.value(batch.next_obs)
        batch.adv, batch.ret = compute_gae(rewards, v, nv, batch.terminal, batch.ends, self.discount(gamma),
                                           self.config.lam, terminal_value)
        return batch

    def update(self, batch: RolloutBatch) -> dict:
        return ppo_update(self.policy, self.value, batch, self.config, self.opt_pi, self.opt_v, self.rng)


def ppo_update(policy: PolicyNet, value: ValueNet, batch: RolloutBatch, config: PPOConfig,
               opt_pi: Adam, opt_v: Adam, rng) -> dict:
    """Several epochs of minibatch clipped-surrogate updates plus value regression.

    A non-finite loss or gradient aborts the whole update and restores the
    parameters held before it started.
    """
    snapshot = (policy.params.flat(), value.params.flat())
    n = len(batch)
    adv = batch.adv
    if n > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    stats = {"approx_kl": [], "clip_frac": [], "entropy": [], "policy_loss": [], "value_loss": []}
    try:
        for _ in range(config.epochs):
            order = rng.permutation(n)
            for start in range(0, n, config.minibatch):
                mb = order[start:start + config.minibatch]
                loss, grads, st = ppo_loss(policy, batch.obs[mb], batch.acts[mb], batch.logp[mb], adv[mb],
                                           config.clip, config.ent_coef)
                if not np.isfinite(loss):
                    raise NonFiniteLoss("policy loss is not finite")
                opt_pi.step(grads)
                vloss, vgrads = value.loss_and_grads(batch.obs[mb], batch.ret[mb])
                if not np.isfinite(vloss):
                    raise NonFiniteLoss("value loss is not finite")
                opt_v.step(vgrads)
                for k in ("approx_kl", "clip_frac", "entropy"):
                    stats[k].append(st[k])
                stats["policy_loss"].append(loss)
                stats["value_loss"].append(vloss)
        if not (policy.params.finite() and value.params.finite()):
            raise NonFiniteLoss("parameters became non-finite")
    except NonFiniteLoss:
        policy.params.set_flat(snapshot[0])
        value.params.set_flat(snapshot[1])
        raise
    return {k: float(np.mean(v)) if v else 0.0 for k, v in stats.items()}


@dataclass
class TrainResult:
    policy: PolicyNet
    history: list
    transitions: int
    extra: dict = field(default_factory=dict)


def ppo_train(env, budget: int, config: PPOConfig = PPOConfig(), seed: int = 0,
              reward_fn: Callable | None = None, callback: Callable | None = None) -> TrainResult:
    """Plain PPO on the environment reward (or ``reward_fn(batch)`` if given)."""
    learner = PPOLearner(env.spec.obs_dim, env.spec.action_dims, config, seed)
    sampler = Sampler(env, seed)
    history = []
    while sampler.steps < budget:
        n = min(config.n_steps, budget - sampler.steps)
        batch = sampler.collect(learner.policy, n)
        rewards = None if reward_fn is None else reward_fn(batch)
        learner.prepare(batch, rewards, env.spec.gamma)
        st = learner.update(batch)
        st.update(transitions=sampler.steps,
                  mean_ep_len=float(np.mean(batch.episode_lengths)) if batch.episode_lengths else float("nan"))
        history.append(st)
        if callback is not None:
            callback(st)
    return TrainResult(learner.policy, history, sampler.steps, {"value": learner.value})
