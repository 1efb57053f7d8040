"""Command-line entry point: ``cpres <subcommand> --config run.json [--seed N] [--budget N] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..errors import ConfigError, CpresError, StageError
from .artifacts import Artifacts, load_artifacts, save_artifacts
from .config import RunConfig
from .evaluate import EvalReport, ExpertPolicy, RandomPolicy, compare, evaluate, write_comparison
from .run import NEEDS_DEMOS, _stage, _write_log, collect_stage, make_env, run, stage_seed, train_stage
from .surface import surface_for

log = logging.getLogger("cpres")


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    return cfg.with_overrides(seed=args.seed, budget=args.budget, out=args.out)


def cmd_run(args) -> int:
    out = run(_config(args))
    print(json.dumps({"mean": out.report.mean, "std": out.report.std, "reach_rate": out.report.reach_rate}))
    return 0


def cmd_collect(args) -> int:
    cfg = _config(args)
    for seed in cfg.seeds:
        env = _stage("setup", make_env, cfg.env)
        path = Path(cfg.out_dir) / f"seed_{seed}" / "dataset.ndjson"
        # baselines have no demonstrations of their own; record the episode-count kind
        cfg_c = cfg if cfg.algorithm in NEEDS_DEMOS else replace(cfg, algorithm="gail")
        ds = _stage("collect-experts", collect_stage, cfg_c, env, seed, path)
        print(f"{path}: {len(ds)} episodes, {ds.transition_count} transitions")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    for seed in cfg.seeds:
        sdir = Path(cfg.out_dir) / f"seed_{seed}"
        sdir.mkdir(parents=True, exist_ok=True)
        env = _stage("setup", make_env, cfg.env)
        ds = _stage("collect-experts", collect_stage, cfg, env, seed, sdir / "dataset.ndjson")
        _, nets, history = _stage("train", train_stage, cfg, env, ds, seed)
        _write_log(sdir / "train_log.ndjson", history)
        if nets:
            path = save_artifacts(sdir / "artifacts.json",
                                  Artifacts(nets, None, None, {"config": cfg.to_dict(), "seed": seed}))
            print(path)
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    if args.checkpoint:
        arts = _stage("load", load_artifacts, args.checkpoint)
        policy = arts.nets["policy"]
        name = args.name or cfg.algorithm
    elif cfg.algorithm in ("random", "expert"):
        policy = RandomPolicy() if cfg.algorithm == "random" else ExpertPolicy()
        name = args.name or cfg.algorithm
    else:
        raise ConfigError("checkpoint", f"--checkpoint is required to evaluate a trained {cfg.algorithm} policy")
    seeds = [stage_seed(s, 3) for s in cfg.seeds]
    rep = _stage("eval", evaluate, policy, lambda: make_env(cfg.env), cfg.eval_episodes, seeds,
                 greedy=not args.sample, name=name, budget=cfg.budget,
                 provenance={"config_hash": cfg.config_hash(), "checkpoint": args.checkpoint})
    path = rep.save(Path(cfg.out_dir) / f"report_{name}.json")
    print(f"{path}: mean {rep.mean:.3f} std {rep.std:.3f} reach {rep.reach_rate:.3f}")
    return 0


def cmd_compare(args) -> int:
    reports = [EvalReport.load(p) for p in args.reports]
    rows = _stage("compare", compare, reports)
    out = args.out or "."
    csv_path, json_path = write_comparison(rows, out)
    print(csv_path.read_text(), end="")
    return 0


def cmd_surface(args) -> int:
    cfg = _config(args)
    arts = _stage("load", load_artifacts, args.checkpoint)
    net = arts.nets.get("reward_net") or arts.nets.get("discriminator")
    if net is None:
        raise StageError("export-surface", CpresError("checkpoint holds no reward network"))
    env = make_env(cfg.env)
    surf = _stage("export-surface", surface_for, net, env)
    csv_path, _ = surf.save(Path(cfg.out_dir) / f"surface_{surf.meta['kind']}")
    print(csv_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpres", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="RunConfig JSON file")
        sp.add_argument("--seed", type=int, help="override: train/eval with this single seed")
        sp.add_argument("--budget", type=int, help="override: transition budget")
        sp.add_argument("--out", help="override: output directory")
        return sp

    common(sub.add_parser("run", help="collect, train and evaluate")).set_defaults(fn=cmd_run)
    common(sub.add_parser("collect-experts", help="record expert demonstrations")).set_defaults(fn=cmd_collect)
    common(sub.add_parser("train", help="collect (if needed) and train")).set_defaults(fn=cmd_train)
    ev = common(sub.add_parser("eval", help="evaluate a checkpoint or a baseline policy"))
    ev.add_argument("--checkpoint")
    ev.add_argument("--name")
    ev.add_argument("--sample", action="store_true", help="sample actions instead of argmax")
    ev.set_defaults(fn=cmd_eval)
    cp = common(sub.add_parser("compare", help="tabulate evaluation reports"))
    cp.add_argument("reports", nargs="+")
    cp.set_defaults(fn=cmd_compare)
    sf = common(sub.add_parser("export-surface", help="export the learned reward surface"))
    sf.add_argument("--checkpoint", required=True)
    sf.set_defaults(fn=cmd_surface)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CpresError, OSError, ValueError, KeyError) as exc:
        print(f"error: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
