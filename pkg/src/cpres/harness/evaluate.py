"""Evaluation by average episode length, and baseline comparison tables."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable

import numpy as np

from ..errors import MixedEnvironments
from ..learn.policy import PolicyNet
from ..simcore import as_generator

TRUNCATION_NOTE = "episodes truncated at max_steps are counted as max_steps with goal not reached"


@dataclass
class SeedResult:
    seed: int
    lengths: list[int]
    reached: list[bool]

    @property
    def mean(self) -> float:
        return float(np.mean(self.lengths))

    @property
    def std(self) -> float:
        return float(np.std(self.lengths))

    @property
    def reach_rate(self) -> float:
        return float(np.mean(self.reached))

    def to_dict(self) -> dict:
        return {"seed": self.seed, "mean": self.mean, "std": self.std, "reach_rate": self.reach_rate,
                "lengths": list(self.lengths), "reached": list(self.reached)}


@dataclass
class EvalReport:
    policy: str
    env_id: str
    env_hash: str
    max_steps: int
    per_seed: list[SeedResult]
    budget: int | None = None
    provenance: dict = field(default_factory=dict)
    note: str = TRUNCATION_NOTE

    @property
    def lengths(self) -> list[int]:
        return [n for s in self.per_seed for n in s.lengths]

    @property
    def mean(self) -> float:
        return float(np.mean(self.lengths))

    @property
    def std(self) -> float:
        return float(np.std(self.lengths))

    @property
    def reach_rate(self) -> float:
        return float(np.mean([r for s in self.per_seed for r in s.reached]))

    @property
    def seed_means(self) -> list[float]:
        return [s.mean for s in self.per_seed]

    def to_dict(self) -> dict:
        return {"policy": self.policy, "env_id": self.env_id, "env_hash": self.env_hash,
                "max_steps": self.max_steps, "mean": self.mean, "std": self.std, "reach_rate": self.reach_rate,
                "budget": self.budget, "per_seed": [s.to_dict() for s in self.per_seed],
                "provenance": dict(self.provenance), "note": self.note}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        per_seed = [SeedResult(int(s["seed"]), [int(x) for x in s["lengths"]], [bool(x) for x in s["reached"]])
                    for s in d["per_seed"]]
        return cls(d["policy"], d["env_id"], d["env_hash"], int(d["max_steps"]), per_seed, d.get("budget"),
                   dict(d.get("provenance", {})), d.get("note", TRUNCATION_NOTE))

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _actor_for(policy, env, seed: int, greedy: bool):
    """Turn a PolicyNet, an ``(env, seed) -> actor`` factory or a plain callable into ``obs -> action``."""
    if isinstance(policy, PolicyNet):
        return policy.actor(greedy=greedy, rng=seed)
    if getattr(policy, "needs_env", False):
        return policy(env, seed)
    return policy


def eval_seeds(seed: int, n_episodes: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence([int(seed), 2]).generate_state(n_episodes, dtype=np.uint64)]


def run_eval_episode(env, actor: Callable, reset_seed: int, spare: np.random.Generator):
    """One episode; resets that are already at the goal are redrawn. Returns (length, reached)."""
    r = env.reset(seed=reset_seed)
    while r.done:
        r = env.reset(seed=int(spare.integers(2**63)))
    n = 0
    while not r.done:
        r = env.step(int(actor(r.obs)))
        n += 1
    return n, bool(r.info.get("goal_reached"))


def evaluate(policy, env_factory: Callable, n_episodes: int = 100, seeds=(0,), greedy: bool = True,
             name: str = "policy", budget: int | None = None, provenance: dict | None = None) -> EvalReport:
    """Average episode length over ``n_episodes`` per seed (greedy actions by default)."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    per_seed = []
    env = None
    for seed in seeds:
        env = env_factory()
        actor = _actor_for(policy, env, int(seed), greedy)
        spare = as_generator(np.random.SeedSequence([int(seed), 3]).generate_state(1)[0])
        lengths, reached = [], []
        for s in eval_seeds(seed, n_episodes):
            n, ok = run_eval_episode(env, actor, s, spare)
            lengths.append(n)
            reached.append(ok)
        per_seed.append(SeedResult(int(seed), lengths, reached))
    return EvalReport(name, env.env_id, env.spec_hash(), env.spec.max_steps, per_seed, budget, dict(provenance or {}))


class RandomPolicy:
    """Uniform random flat actions."""

    needs_env = True

    def __call__(self, env, seed):
        rng = as_generator(np.random.SeedSequence([int(seed), 4]).generate_state(1)[0])
        n = env.spec.n_actions
        return lambda obs: int(rng.integers(n))


class ExpertPolicy:
    """Wraps ``make_expert`` so the expert is bound to the evaluation environment."""

    needs_env = True

    def __call__(self, env, seed):
        from ..experts import make_expert
        return make_expert(env, np.random.SeedSequence([int(seed), 5]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# comparison tables
# ---------------------------------------------------------------------------
COLUMNS = ("rank", "policy", "mean", "std", "reach_rate", "budget", "n_episodes")


def compare(reports: list[EvalReport]) -> list[dict]:
    """One row per report, sorted by mean episode length (ascending)."""
    if not reports:
        return []
    hashes = {r.env_hash for r in reports}
    if len(hashes) > 1:
        raise MixedEnvironments(f"reports come from different environments: {sorted(hashes)}")
    rows = [{"policy": r.policy, "mean": r.mean, "std": r.std, "reach_rate": r.reach_rate,
             "budget": r.budget, "n_episodes": len(r.lengths)} for r in reports]
    rows.sort(key=lambda row: (row["mean"], row["policy"]))
    for i, row in enumerate(rows, 1):
        row["rank"] = i
    return [{k: row[k] for k in COLUMNS} for row in rows]


def comparison_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_comparison(rows: list[dict], out_dir, stem: str = "comparison") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    csv_path.write_text(comparison_csv(rows))
    json_path.write_text(json.dumps({"rows": rows, "note": TRUNCATION_NOTE}, indent=2, sort_keys=True))
    return csv_path, json_path
