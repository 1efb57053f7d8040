"""Adversarial imitation: GAIL and AIRL with a PPO generator.

Episodes here end when a goal is reached. With rewards that are positive on
average (-log D always is), a generator would learn to postpone the goal, so
by default a goal-terminated episode is treated as entering an absorbing
state. The discriminator sees one absorbing sample per finished episode on
both sides and learns a scalar logit for it; the generator bootstraps the
terminal transition with that absorbing reward summed to infinity.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, asdict

import numpy as np

from ..errors import EmptyDataset, NonFiniteLoss, RequiresLogProb
from ..simcore import as_generator
from .losses import bce_terms, softplus
from .mlp import Adam
from .policy import PolicyNet
from .ppo import PPOConfig, PPOLearner, Sampler, TrainResult
from .reward import RewardNet

log = logging.getLogger(__name__)


class ModeCollapse(UserWarning):
    """The discriminator has separated expert and generator samples for several rounds in a row."""


@dataclass(frozen=True)
class AdversarialConfig:
    ppo: PPOConfig = PPOConfig()
    disc_lr: float = 3e-4
    disc_steps: int = 8
    disc_minibatch: int = 128
    disc_hidden: tuple[int, ...] = (32, 32)
    ent_coef: float = 1e-3                 # lambda, also used as the PPO entropy bonus
    use_action: bool = True                # GAIL: False drops the action from the discriminator input
    mode: str = "state_action"             # AIRL reward input
    paper_sign: bool = False               # AIRL: use log(1-D) - log(D) as generator reward
    absorbing: bool = True
    collapse_acc: float = 0.99
    collapse_rounds: int = 10

    def to_dict(self):
        d = asdict(self)
        d["ppo"] = self.ppo.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AdversarialConfig":
        d = dict(d)
        ppo = d.pop("ppo", {})
        ppo = {k: tuple(v) if k == "hidden" else v for k, v in ppo.items()}
        if "disc_hidden" in d:
            d["disc_hidden"] = tuple(d["disc_hidden"])
        return cls(ppo=PPOConfig(**ppo), **d)


class _CollapseWatch:
    def __init__(self, acc, rounds):
        self.acc, self.rounds, self.count = acc, rounds, 0

    def update(self, acc):
        self.count = self.count + 1 if acc > self.acc else 0
        if self.count == self.rounds:
            warnings.warn(f"discriminator accuracy above {self.acc} for {self.rounds} rounds", ModeCollapse)


class Discriminator:
    """Classifier on logits u = logit P(expert).

    ``gail``: the net outputs z = logit P(generator), so u = -z and the
    generator reward is -log D = softplus(u).
    ``airl``: u = f - log pi and the generator reward is u (or -u under the
    literal sign). The absorbing state has its own scalar logit. Every action
    is equivalent there, so the entropy-regularized optimum is uniform and
    log pi = -log |A| enters its AIRL logit.
    """

    def __init__(self, kind: str, net: RewardNet, lr: float, max_grad_norm: float, paper_sign: bool = False):
        self.log_n_actions = float(np.sum(np.log(net.action_dims)))
        if kind not in ("gail", "airl"):
            raise ValueError(kind)
        self.kind = kind
        self.net = net
        self.absorbing_logit = np.zeros(1)
        self.paper_sign = paper_sign
        self.opt = Adam(net.params.arrays() + [self.absorbing_logit], lr=lr, max_grad_norm=max_grad_norm)
        self._sign = -1.0 if kind == "gail" else 1.0

    def _acts(self, acts):
        return acts if self.net.mode == "state_action" else None

    def logits(self, obs, acts, logpi=None, return_cache=False):
        out, cache = self.net.forward_cache(obs, self._acts(acts))
        u = self._sign * out
        if self.kind == "airl":
            u = u - logpi
        return (u, cache) if return_cache else u

    @property
    def u_absorbing(self) -> float:
        u = self._sign * float(self.absorbing_logit[0])
        return u + self.log_n_actions if self.kind == "airl" else u

    def reward_from_logits(self, u):
        if self.kind == "gail":
            return softplus(u)
        return -u if self.paper_sign else u

    def rewards(self, obs, acts, logpi=None):
        return self.reward_from_logits(self.logits(obs, acts, logpi))

    @property
    def absorbing_reward(self) -> float:
        return float(self.reward_from_logits(np.array([self.u_absorbing]))[0])

    def step(self, e, g):
        """One BCE step; ``e``/``g`` are (obs, acts, logpi, n_absorbing) for each side."""
        us, caches = [], []
        for obs, acts, logpi, n_abs in (e, g):
            parts, cache = [], None
            if len(obs):
                u, cache = self.logits(obs, acts, logpi, return_cache=True)
                parts.append(u)
            parts.append(np.full(n_abs, self.u_absorbing))
            us.append(np.concatenate(parts))
            caches.append((cache, len(obs)))
        loss, du_e, du_g, acc = bce_terms(us[0], us[1])
        if not np.isfinite(loss):
            raise NonFiniteLoss("discriminator loss is not finite")
        grads = [np.zeros_like(a) for a in self.net.params.arrays()]
        g_abs = 0.0
        for (cache, n), du in ((caches[0], du_e), (caches[1], du_g)):
            if n:
                for acc_g, gr in zip(grads, self.net.backward(cache, self._sign * du[:n])):
                    acc_g += gr
            g_abs += self._sign * float(du[n:].sum())
        self.opt.step(grads + [np.array([g_abs])])
        return loss, acc


class _Pool:
    """Transition samples plus a count of absorbing samples, drawn uniformly together."""

    def __init__(self, obs, acts, n_absorbing):
        self.obs, self.acts, self.n_abs = obs, acts, int(n_absorbing)

    def __len__(self):
        return len(self.acts) + self.n_abs

    def draw(self, rng, size, logpi=None):
        idx = rng.integers(len(self), size=size)
        real = idx[idx < len(self.acts)]
        lp = None if logpi is None else logpi[real]
        return self.obs[real], self.acts[real], lp, int((idx >= len(self.acts)).sum())


def _expert_pool(dataset, absorbing: bool) -> _Pool:
    trajs = [t for t in dataset.usable() if len(t)]
    if not trajs:
        raise EmptyDataset("expert dataset has no usable transitions")
    obs = np.concatenate([t.obs for t in trajs])
    acts = np.concatenate([t.acts for t in trajs])
    n_abs = sum(1 for t in trajs if t.meta.get("goal_reached", bool(t.dones[-1]))) if absorbing else 0
    return _Pool(obs, acts, n_abs)


def _adversarial_train(kind, env, dataset, budget, config: AdversarialConfig, seed, callback):
    pool_e = _expert_pool(dataset, config.absorbing)
    ss = np.random.SeedSequence(int(seed)).spawn(4)
    ppo_cfg = PPOConfig(**{**config.ppo.to_dict(), "ent_coef": config.ent_coef})
    learner = PPOLearner(env.spec.obs_dim, env.spec.action_dims, ppo_cfg, int(ss[0].generate_state(1)[0]))
    sampler = Sampler(env, int(ss[1].generate_state(1)[0]))
    rng = as_generator(int(ss[2].generate_state(1)[0]))
    policy = learner.policy
    if kind == "airl" and not hasattr(policy, "log_prob"):
        raise RequiresLogProb("generator must expose log pi(a|s)")
    mode = config.mode if kind == "airl" else ("state_action" if config.use_action else "state_only")
    net = RewardNet(env.spec.obs_dim, env.spec.action_dims, mode, config.disc_hidden,
                    rng=int(ss[3].generate_state(1)[0]))
    disc = Discriminator(kind, net, config.disc_lr, config.ppo.max_grad_norm, config.paper_sign)
    watch = _CollapseWatch(config.collapse_acc, config.collapse_rounds)
    gamma = learner.discount(env.spec.gamma)
    history = []
    while sampler.steps < budget:
        n = min(config.ppo.n_steps, budget - sampler.steps)
        batch = sampler.collect(policy, n)
        pool_g = _Pool(batch.obs, batch.acts, int(batch.terminal.sum()) if config.absorbing else 0)
        lp_e = lp_g = None
        if kind == "airl":
            # log pi is frozen at the current policy while the discriminator trains
            lp_e = policy.log_prob(pool_e.obs, pool_e.acts)
            lp_g = policy.log_prob(batch.obs, batch.acts)
        accs, losses = [], []
        for _ in range(config.disc_steps):
            loss, acc = disc.step(pool_e.draw(rng, config.disc_minibatch, lp_e),
                                  pool_g.draw(rng, config.disc_minibatch, lp_g))
            accs.append(acc)
            losses.append(loss)
        watch.update(float(np.mean(accs)))
        lp_now = policy.log_prob(batch.obs, batch.acts) if kind == "airl" else None
        rewards = disc.rewards(batch.obs, batch.acts, lp_now)
        v_abs = disc.absorbing_reward / (1.0 - gamma) if config.absorbing and gamma < 1 else 0.0
        learner.prepare(batch, rewards, env.spec.gamma, terminal_value=v_abs)
        st = learner.update(batch)
        st.update(transitions=sampler.steps, disc_loss=float(np.mean(losses)), disc_acc=float(np.mean(accs)),
                  mean_reward=float(np.mean(rewards)), absorbing_reward=disc.absorbing_reward,
                  mean_ep_len=float(np.mean(batch.episode_lengths)) if batch.episode_lengths else float("nan"))
        history.append(st)
        if callback is not None:
            callback(st)
    key = "reward_net" if kind == "airl" else "discriminator"
    return TrainResult(policy, history, sampler.steps, {key: net, "value": learner.value,
                                                        "absorbing_logit": float(disc.absorbing_logit[0])})


def gail_train(env, dataset, budget: int, config: AdversarialConfig = AdversarialConfig(), seed=0,
               callback=None) -> TrainResult:
    """GAIL: D(s,a) estimates P(generator); the generator maximizes -log D plus lambda * entropy."""
    return _adversarial_train("gail", env, dataset, budget, config, seed, callback)


def airl_train(env, dataset, budget: int, config: AdversarialConfig = AdversarialConfig(), seed=0,
               callback=None) -> TrainResult:
    """AIRL with the structured discriminator exp(f)/(exp(f) + pi); the learned f is returned
    in ``extra['reward_net']``."""
    return _adversarial_train("airl", env, dataset, budget, config, seed, callback)


def airl_reward(f_net: RewardNet, policy: PolicyNet, obs, acts, paper_sign: bool = False) -> np.ndarray:
    """Generator reward log D - log(1 - D) = f - log pi (negated under ``paper_sign``)."""
    if not hasattr(policy, "log_prob"):
        raise RequiresLogProb("generator must expose log pi(a|s)")
    z = f_net(obs, acts if f_net.mode == "state_action" else None) - policy.log_prob(obs, acts)
    return -z if paper_sign else z
