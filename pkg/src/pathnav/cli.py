"""Command line front end.

Exit codes: 0 success, 2 bad usage or config, 3 unreadable data (checkpoints,
records, scenario files), 4 runtime failure (diverged training, impossible
scenario). Every run writes the fully resolved config next to its outputs so
results stay reproducible from the artifacts alone.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, emit_toml, load_run_config, replace_section
from .scenarios import ScenarioError, ScenarioKind, generate_scenario, world_to_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _out_dir(args, command: str) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("PATHNAV_OUT")
    if env:
        return Path(env) / command
    return Path("runs") / command


def _snapshot(cfg: RunConfig, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.toml").write_text(emit_toml(cfg))


def _apply_common(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace_section(cfg, "run", seed=args.seed)
    if getattr(args, "workers", None) is not None:
        cfg = replace_section(cfg, "run", workers=args.workers)
    return cfg


def _cmd_train(cfg: RunConfig, args) -> int:
    from .rl import train

    if args.decisions is not None:
        cfg = replace_section(cfg, "train", total_decisions=args.decisions)
    if args.stage is not None:
        cfg = replace_section(cfg, "train", stage=args.stage)
    if args.kind is not None:
        cfg = replace_section(cfg, "train", fixed_kind=args.kind)
    if args.init is not None:
        cfg = replace_section(cfg, "train", init_checkpoint=args.init)
    if args.lowlevel:
        cfg = replace_section(cfg, "train", lowlevel=True)
    out = _out_dir(args, "train")
    _snapshot(cfg, out)
    try:
        result = train(cfg.train_config(), out)
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"checkpoint": str(result.checkpoint),
                      "decisions": result.decisions,
                      "episodes": result.episodes,
                      "stopped_early": result.stopped_early,
                      "eval_history": result.eval_history}, sort_keys=True))
    return EXIT_OK


def _cmd_eval(cfg: RunConfig, args) -> int:
    from .evaluation import run_eval, write_report
    from .rl import load_checkpoint

    if args.kind is not None:
        cfg = replace_section(cfg, "eval", kind=args.kind)
    if args.episodes is not None:
        cfg = replace_section(cfg, "eval", episodes=args.episodes)
    if not Path(args.checkpoint).exists():
        print(f"error: checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return EXIT_DATA
    try:
        load_checkpoint(args.checkpoint)   # schema check up front
    except (ValueError, KeyError, OSError) as e:
        print(f"error: unreadable checkpoint: {e}", file=sys.stderr)
        return EXIT_DATA
    out = _out_dir(args, "eval")
    _snapshot(cfg, out)
    try:
        report = run_eval(checkpoint=args.checkpoint, kind=cfg.eval.kind,
                          episodes=cfg.eval.episodes, seed_base=cfg.eval.seed_base,
                          cfg=cfg.rollout_config(), workers=cfg.run.workers)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    write_report(out, report)
    print(report.metrics.to_json())
    return EXIT_OK


def _cmd_replay(cfg: RunConfig, args) -> int:
    from .evaluation import read_records, render_replay_svg

    try:
        records = read_records(args.records)
    except (OSError, json.JSONDecodeError, TypeError, KeyError) as e:
        print(f"error: unreadable records file: {e}", file=sys.stderr)
        return EXIT_DATA
    if not records:
        print("error: records file is empty", file=sys.stderr)
        return EXIT_DATA
    if args.index is not None and not 0 <= args.index < len(records):
        print(f"error: index {args.index} out of range 0..{len(records) - 1}",
              file=sys.stderr)
        return EXIT_CONFIG
    chosen = records if args.index is None else [records[args.index]]
    out = _out_dir(args, "replay")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for rec in chosen:
        try:
            svg = render_replay_svg(rec, actions=cfg.actions)
        except (ScenarioError, ValueError) as e:
            print(f"error: cannot rebuild scenario for replay: {e}", file=sys.stderr)
            return EXIT_DATA
        p = out / f"replay_{rec.kind}_{rec.seed}_r{rec.robot}.svg"
        p.write_text(svg)
        written.append(str(p))
    print(json.dumps({"written": written}, sort_keys=True))
    return EXIT_OK


def _cmd_gen_scenarios(cfg: RunConfig, args) -> int:
    try:
        kind = ScenarioKind(args.kind)
    except ValueError:
        print(f"error: unknown scenario kind {args.kind!r}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args, "scenarios")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(args.count):
        seed = args.seed_base + i
        try:
            world = generate_scenario(kind, seed)
        except ScenarioError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_RUNTIME
        p = out / f"{kind.value}_{seed}.json"
        p.write_text(world_to_json(world) + "\n")
        written.append(str(p))
    print(json.dumps({"written": written}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathnav",
        description="Train, evaluate, and replay path-planning navigation policies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--out", help="output directory (default $PATHNAV_OUT/<cmd>)")
        p.add_argument("--seed", type=int, help="override run.seed")

    p = sub.add_parser("train", help="train a policy")
    common(p)
    p.add_argument("--decisions", type=int, help="total path decisions to train for")
    p.add_argument("--stage", type=int, choices=(1, 2))
    p.add_argument("--kind", help="pin every training episode to one scenario kind")
    p.add_argument("--init", help="checkpoint to continue from")
    p.add_argument("--lowlevel", action="store_true",
                   help="per-step (v, theta) baseline instead of path actions")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on held-out scenarios")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--kind", help="scenario kind to evaluate on")
    p.add_argument("--episodes", type=int)
    p.add_argument("--workers", type=int, help="parallel evaluation processes")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("replay", help="render recorded episodes to SVG")
    common(p)
    p.add_argument("--records", required=True, help="records JSONL from eval")
    p.add_argument("--index", type=int, help="single record index (default: all)")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("gen-scenarios", help="write scenario JSON files")
    common(p)
    p.add_argument("--kind", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed-base", type=int, default=0)
    p.set_defaults(func=_cmd_gen_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_run_config(args.config)
        cfg = _apply_common(cfg, args)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
