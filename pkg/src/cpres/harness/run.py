"""End-to-end pipeline: collect expert data, train, evaluate, write artifacts."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..cpenv import CombinedConfig, CyberPhysicalEnv
from ..dataset import TrajectoryDataset
from ..errors import ConfigError, StageError
from ..experts import collect_demonstrations, collect_transitions, make_expert
from ..feedersim import FeederConfig, FeederEnv
from ..learn.adversarial import AdversarialConfig, airl_train, gail_train
from ..learn.imitation import BCConfig, DaggerConfig, DaggerSchedule, bc_train_dataset, dagger_train
from ..learn.ppo import PPOConfig, ppo_train
from ..netsim import NetConfig, NetSimEnv
from .artifacts import Artifacts, payload_hash, save_artifacts
from .config import EnvSelection, RunConfig
from .evaluate import EvalReport, ExpertPolicy, RandomPolicy, evaluate

log = logging.getLogger(__name__)

NEEDS_DEMOS = ("bc", "gail", "airl")


def make_env(sel: EnvSelection):
    kw = {} if sel.max_steps is None else {"max_steps": sel.max_steps}
    if sel.kind == "netsim":
        return NetSimEnv(sel.topology, config=NetConfig(**kw))
    if sel.kind == "feedersim":
        return FeederEnv(sel.feeder, config=FeederConfig(**kw))
    if sel.kind == "cpenv":
        return CyberPhysicalEnv(sel.topology, sel.feeder, config=CombinedConfig(**kw))
    raise ConfigError("env.kind", f"unknown environment kind {sel.kind!r}")


def _sub(hyper: dict, key: str) -> dict:
    d = dict(hyper.get(key, {}))
    for k in ("hidden", "disc_hidden"):
        if k in d:
            d[k] = tuple(d[k])
    return d


def _ppo_config(hyper) -> PPOConfig:
    return PPOConfig(**_sub(hyper, "ppo"))


def _stage(stage_name: str, fn, /, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:   # noqa: BLE001 - re-raised with a stage tag
        raise StageError(stage_name, exc) from exc


def stage_seed(seed: int, stage: int) -> int:
    return int(np.random.SeedSequence([int(seed), 100 + stage]).generate_state(1)[0])


def collect_stage(config: RunConfig, env, seed: int, path=None) -> TrajectoryDataset | None:
    if config.algorithm not in NEEDS_DEMOS:
        return None
    if config.expert_source is not None:
        return TrajectoryDataset.load(config.expert_source, expect_hash=env.spec_hash())
    expert = make_expert(env, stage_seed(seed, 0))
    if config.algorithm == "bc":
        return collect_transitions(env, expert, config.budget, stage_seed(seed, 1), path)
    return collect_demonstrations(env, expert, config.expert_episodes, stage_seed(seed, 1), path)


def train_stage(config: RunConfig, env, dataset, seed: int):
    """Returns (policy or None, nets to checkpoint, training history)."""
    algo = config.algorithm
    hyper = config.hyper
    tseed = stage_seed(seed, 2)
    if algo in ("random", "expert"):
        return None, {}, []
    if algo == "bc":
        bc = BCConfig(**_sub(hyper, "bc"))
        policy, loss = bc_train_dataset(dataset, config=bc, seed=tseed)
        return policy, {"policy": policy}, [{"loss": float(loss), "transitions": dataset.transition_count}]
    if algo == "dagger":
        d = _sub(hyper, "dagger")
        schedule = DaggerSchedule(**d.pop("schedule", {}))
        bc = BCConfig(**_sub(hyper, "bc"))
        expert = make_expert(env, stage_seed(seed, 0))
        res = dagger_train(env, expert, config.budget, schedule, DaggerConfig(bc=bc, **d), tseed)
        return res.policy, {"policy": res.policy}, res.history
    if algo == "ppo":
        res = ppo_train(env, config.budget, _ppo_config(hyper), tseed)
        return res.policy, {"policy": res.policy, "value": res.extra["value"]}, res.history
    adv = AdversarialConfig.from_dict({**_sub(hyper, "adversarial"), "ppo": _sub(hyper, "ppo")})
    fn = gail_train if algo == "gail" else airl_train
    res = fn(env, dataset, config.budget, adv, tseed)
    key = "reward_net" if algo == "airl" else "discriminator"
    return res.policy, {"policy": res.policy, "value": res.extra["value"], key: res.extra[key]}, res.history


@dataclass
class RunOutput:
    report: EvalReport
    seed_dirs: list[Path] = field(default_factory=list)
    policies: dict = field(default_factory=dict)
    nets: dict = field(default_factory=dict)


def _write_log(path: Path, history: list):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("".join(json.dumps(h, sort_keys=True) + "\n" for h in history))
    tmp.replace(path)


def run(config: RunConfig, write: bool = True) -> RunOutput:
    """Collect -> train -> evaluate for every configured seed.

    Each training seed is evaluated on its own episode stream; the combined
    report carries one per-seed entry per training seed.
    """
    config.validate()
    out = Path(config.out_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        config.save(out / "config.json")
    per_seed, seed_dirs, policies, all_nets, ckpt_hashes = [], [], {}, {}, []
    env_factory = lambda: make_env(config.env)  # noqa: E731
    report = None
    for seed in config.seeds:
        sdir = out / f"seed_{seed}"
        if write:
            sdir.mkdir(parents=True, exist_ok=True)
        env = _stage("setup", env_factory)
        dataset = _stage("collect-experts", collect_stage, config, env, seed,
                         sdir / "dataset.ndjson" if write else None)
        policy, nets, history = _stage("train", train_stage, config, env, dataset, seed)
        if policy is None:
            policy = RandomPolicy() if config.algorithm == "random" else ExpertPolicy()
        ckpt_hash = payload_hash({k: v.to_dict() for k, v in nets.items()}) if nets else None
        rep = _stage("eval", evaluate, policy, env_factory, config.eval_episodes, [stage_seed(seed, 3)],
                     name=config.algorithm, budget=config.budget,
                     provenance={"config_hash": config.config_hash(), "checkpoint_hash": ckpt_hash})
        rep.per_seed[0].seed = int(seed)
        per_seed.extend(rep.per_seed)
        ckpt_hashes.append(ckpt_hash)
        report = rep
        policies[seed] = policy
        all_nets[seed] = nets
        if write:
            _write_log(sdir / "train_log.ndjson", history)
            rep.save(sdir / "report.json")
            if nets:
                save_artifacts(sdir / "artifacts.json",
                               Artifacts(nets, None, rep, {"config": config.to_dict(), "seed": seed}))
            seed_dirs.append(sdir)
    combined = EvalReport(config.algorithm, report.env_id, report.env_hash, report.max_steps, per_seed,
                          config.budget, {"config_hash": config.config_hash(), "checkpoint_hashes": ckpt_hashes})
    if write:
        combined.save(out / "report.json")
    return RunOutput(combined, seed_dirs, policies, all_nets)
