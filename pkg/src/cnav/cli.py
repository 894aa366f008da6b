"""Command-line entry point.

Subcommands: ``train``, ``eval``, ``gradcheck``, ``scenario``.  Exit codes:
0 success, 1 runtime failure, 2 usage or config error.  ``CNAV_SEED`` serves
as the seed fallback whenever ``--seed`` is not given.

``scenario`` exports ``geometry.csv`` with one shape per row as
``kind,p0..p7``: box -> center + half extents; sphere -> center + radius;
cylinder -> base center + radius + height; prism -> three base vertices
(x, y pairs) + base z + height.  ``agents.csv`` holds one row per start and
per goal.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from cnav.checkpoint import CheckpointError
from cnav.config import (ConfigError, WorldConfig, load_run_config,
                         run_config_from_dict, run_config_to_dict,
                         scenario_from_dict)
from cnav.geometry import Box, Cylinder, Prism, Sphere
from cnav.metrics import MetricsError, paired_delta, run_suite, write_table
from cnav.scenario import ScenarioError, build_scenario
from cnav.trainer import Trainer, TrainerError

GEOMETRY_COLUMNS = ("kind", "p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7")
AGENT_COLUMNS = ("agent_id", "role", "x", "y", "z")


def env_seed() -> int | None:
    raw = os.environ.get("CNAV_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"CNAV_SEED must be an integer, got '{raw}'") from None


def resolve_seed(flag_value: int | None, default: int | None = None) -> int | None:
    if flag_value is not None:
        return flag_value
    from_env = env_seed()
    if from_env is not None:
        return from_env
    return default


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    if args.resume is not None:
        trainer = Trainer.restore(args.resume, out_dir=args.out)
    else:
        cfg = load_run_config(args.config)
        seed = resolve_seed(args.seed)
        if seed is not None:
            data = run_config_to_dict(cfg)
            data["trainer"]["seed"] = seed
            cfg = run_config_from_dict(data)
        trainer = Trainer(cfg, out_dir=args.out)
    try:
        summary = trainer.train()
    finally:
        trainer.close()
    print(f"trained {summary['steps']} env steps, {summary['updates']} updates, "
          f"{summary['episodes']} episodes")
    if summary["eval_history"]:
        print(f"last eval success rate: {summary['eval_history'][-1]:.1f}%")
    return 0


def _load_suite(path):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"suite file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"suite file {path} is not valid JSON: {e}") from None
    if isinstance(data, dict):
        data = data.get("scenarios")
    if not isinstance(data, list) or not data:
        raise ConfigError(
            f"suite file {path} must hold a non-empty list of scenarios "
            "(or an object with a 'scenarios' list)")
    return [scenario_from_dict(entry, f"suite[{i}]") for i, entry in enumerate(data)]


def cmd_eval(args) -> int:
    suite = _load_suite(args.suite)
    seed = resolve_seed(args.seed, default=0)
    out = Path(args.out)
    table = run_suite(args.checkpoint, suite, args.episodes, seed, out)
    if args.baseline is not None:
        base_table = run_suite(args.baseline, suite, args.episodes, seed,
                               out / "baseline")
        delta = paired_delta(table, base_table)
        write_table(out / "delta.csv", delta)
        (out / "delta.json").write_text(
            json.dumps(delta, indent=2, sort_keys=True) + "\n")
    for row in table:
        print(f"{row['scene']}: success {row['success_rate']:.1f}%  "
              f"spl {row['spl']:.1f}")
    return 0


def cmd_gradcheck(args) -> int:
    from cnav.gradcheck import run_battery

    seed = resolve_seed(args.seed, default=0)
    results = run_battery(seed=seed, include_composites=not args.primitives_only)
    failures = 0
    for name, err in results:
        status = "ok" if err < args.threshold else "FAIL"
        failures += status == "FAIL"
        print(f"{name:38s} {err:12.3e}  {status}")
    worst_name, worst = max(results, key=lambda kv: kv[1])
    print(f"worst: {worst_name} at {worst:.3e} "
          f"({len(results)} components, threshold {args.threshold:g})")
    return 1 if failures else 0


def _geometry_row(shape) -> dict:
    if isinstance(shape, Box):
        vals = (*shape.center, *shape.half)
        kind = "box"
    elif isinstance(shape, Sphere):
        vals = (*shape.center, shape.radius)
        kind = "sphere"
    elif isinstance(shape, Cylinder):
        vals = (*shape.base, shape.radius, shape.height)
        kind = "cylinder"
    elif isinstance(shape, Prism):
        vals = (*(c for v in shape.verts for c in v), shape.z0, shape.height)
        kind = "prism"
    else:
        raise TrainerError(f"unknown shape type {type(shape).__name__}")
    row = {"kind": kind}
    for i, v in enumerate(vals):
        row[f"p{i}"] = f"{float(v):.6f}"
    return row


def cmd_scenario_preview(args) -> int:
    try:
        data = json.loads(Path(args.spec).read_text())
    except FileNotFoundError:
        raise ConfigError(f"spec file {args.spec} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"spec file {args.spec} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"spec file {args.spec} must hold a JSON object")
    if "scenario" in data:
        run_cfg = run_config_from_dict(data)
        spec, world_cfg = run_cfg.scenario, run_cfg.world
    else:
        spec, world_cfg = scenario_from_dict(data), WorldConfig()
    seed = resolve_seed(args.seed, default=spec.seed)
    sc = build_scenario(spec, world_cfg, seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "geometry.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=GEOMETRY_COLUMNS)
        writer.writeheader()
        for shape in sc.shapes:
            writer.writerow(_geometry_row(shape))
    with open(out / "agents.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=AGENT_COLUMNS)
        writer.writeheader()
        for role, points in (("start", sc.starts), ("goal", sc.goals)):
            for i, p in enumerate(points):
                writer.writerow({"agent_id": i, "role": role,
                                 "x": f"{p[0]:.6f}", "y": f"{p[1]:.6f}",
                                 "z": f"{p[2]:.6f}"})
    print(f"wrote {len(sc.shapes)} shapes and {len(sc.starts)} agents to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cnav",
        description="Depth-only multi-agent point-goal navigation: "
                    "training, evaluation, scene export, gradient checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the training loop from a JSON config")
    p.add_argument("--config", help="run config JSON (required unless resuming)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override trainer.seed")
    p.add_argument("--resume", help="continue from a training checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint over a scenario suite")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--suite", required=True, help="JSON list of scenario specs")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--baseline", help="second checkpoint; adds its table and a delta")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op "
                                         "and composite objective")
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.add_argument("--primitives-only", action="store_true",
                   help="skip the composite objectives")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("scenario", help="export scene geometry and agent "
                                        "placements as CSV")
    p.add_argument("--spec", required=True,
                   help="scenario JSON (bare spec or full run config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_scenario_preview)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "train":
        if args.resume is None and args.config is None:
            parser.error("train needs --config (or --resume)")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (TrainerError, CheckpointError, MetricsError, ScenarioError,
            OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
