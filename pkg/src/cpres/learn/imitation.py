"""Behavioral cloning and DAgger."""
from __future__ import annotations

import logging
from dataclasses import dataclass, asdict

import numpy as np

from ..errors import CpresError, EmptyDataset, NonFiniteLoss
from ..simcore import as_generator
from .losses import bc_loss
from .mlp import Adam
from .policy import PolicyNet
from .ppo import EpisodeSeeds, TrainResult

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BCConfig:
    epochs: int = 20
    minibatch: int = 64
    lr: float = 1e-3
    max_grad_norm: float = 0.5
    hidden: tuple[int, ...] = (32, 32)

    def to_dict(self):
        return asdict(self)


def bc_train(obs, acts, policy: PolicyNet, config: BCConfig = BCConfig(), seed=0, optimizer: Adam | None = None):
    """Minimize the NLL of expert actions; returns (policy, final full-batch loss)."""
    obs = np.asarray(obs, dtype=float)
    acts = np.asarray(acts, dtype=np.int64)
    if len(acts) == 0:
        raise EmptyDataset("no transitions to clone")
    rng = as_generator(seed)
    opt = optimizer or Adam(policy.params.arrays(), lr=config.lr, max_grad_norm=config.max_grad_norm)
    n = len(acts)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch):
            mb = order[start:start + config.minibatch]
            loss, grads = bc_loss(policy, obs[mb], acts[mb])
            if not np.isfinite(loss):
                raise NonFiniteLoss("BC loss is not finite")
            opt.step(grads)
    final, _ = bc_loss(policy, obs, acts)
    return policy, final


def bc_train_dataset(dataset, policy: PolicyNet | None = None, config: BCConfig = BCConfig(), seed=0,
                     include_failed: bool = False):
    obs, acts, _, _ = dataset.arrays(include_failed)
    if len(acts) == 0:
        raise EmptyDataset("dataset has no usable transitions")
    if policy is None:
        dims = tuple(dataset.env["action_dims"])
        policy = PolicyNet(obs.shape[1], dims, config.hidden, rng=seed)
    return bc_train(obs, acts, policy, config, seed)


# ---------------------------------------------------------------------------
# DAgger
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DaggerSchedule:
    """Mixture weights beta_i (1-based): ``first`` = I(i=1), ``constant`` = p, ``decay`` = p^(i-1)."""

    kind: str = "first"
    p: float = 0.5

    def __post_init__(self):
        if self.kind not in ("first", "constant", "decay"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    def beta(self, i: int) -> float:
        if self.kind == "first":
            return 1.0 if i == 1 else 0.0
        if self.kind == "constant":
            return self.p
        return self.p ** (i - 1)

    def betas(self, n: int) -> list[float]:
        return [self.beta(i) for i in range(1, n + 1)]


@dataclass(frozen=True)
class DaggerConfig:
    iterations: int = 5
    val_episodes: int = 20
    bc: BCConfig = BCConfig()


def _greedy_eval(env, policy: PolicyNet, seeds) -> float:
    lengths = []
    for s in seeds:
        r = env.reset(seed=s)
        n = 0
        while not r.done:
            r = env.step(int(policy.greedy(r.obs)[0]))
            n += 1
        lengths.append(n)
    return float(np.mean(lengths))


def dagger_train(env, expert, budget: int, schedule: DaggerSchedule = DaggerSchedule(),
                 config: DaggerConfig = DaggerConfig(), seed=0) -> TrainResult:
    """Dataset aggregation with expert relabelling of every visited state.

    ``budget`` transitions are split evenly across iterations. Each iteration
    rolls out the mixture (expert with probability beta_i, else the current
    learner), labels each visited state with the expert action, aggregates,
    retrains and scores the policy on held-out episodes; the best scoring
    policy is returned. Episodes where the expert raises are cut short.
    """
    n_iter = max(1, int(config.iterations))
    per_iter = max(1, budget // n_iter)
    ss = np.random.SeedSequence(int(seed))
    s_pol, s_mix, s_ep, s_val, s_fit = ss.spawn(5)
    policy = PolicyNet(env.spec.obs_dim, env.spec.action_dims, config.bc.hidden,
                       rng=as_generator(int(s_pol.generate_state(1)[0])))
    opt = Adam(policy.params.arrays(), lr=config.bc.lr, max_grad_norm=config.bc.max_grad_norm)
    mix_rng = as_generator(int(s_mix.generate_state(1)[0]))
    fit_rng = as_generator(int(s_fit.generate_state(1)[0]))
    episodes = EpisodeSeeds(int(s_ep.generate_state(1)[0]))
    val_seeds = [int(s) for s in s_val.generate_state(config.val_episodes, dtype=np.uint64)]
    data_obs: list = []
    data_act: list = []
    history = []
    best = (np.inf, policy.params.flat())
    for i in range(1, n_iter + 1):
        beta = schedule.beta(i)
        collected = 0
        skipped = 0
        while collected < per_iter:
            r = env.reset(seed=next(episodes))
            if hasattr(expert, "reseed"):
                expert.reseed(int(mix_rng.integers(2**63)))
            while not r.done and collected < per_iter:
                try:
                    label = int(expert(r.obs))
                except CpresError as exc:
                    log.info("expert failed, episode skipped: %s", exc)
                    skipped += 1
                    break
                data_obs.append(r.obs)
                data_act.append(label)
                collected += 1
                a = label if mix_rng.random() < beta else int(policy.sample(r.obs, mix_rng)[0][0])
                r = env.step(a)
        _, loss = bc_train(np.asarray(data_obs), np.asarray(data_act), policy, config.bc, fit_rng, opt)
        score = _greedy_eval(env, policy, val_seeds)
        history.append({"iteration": i, "beta": beta, "dataset_size": len(data_act), "loss": float(loss),
                        "val_mean_ep_len": score, "skipped": skipped})
        if score < best[0]:
            best = (score, policy.params.flat())
    policy.params.set_flat(best[1])
    return TrainResult(policy, history, len(data_act), {"best_val": best[0]})
