"""Command-line front door: experiment configuration, deterministic seeding,
structured CSV/JSON output, and the structural verification suite.

    lab run config.toml [--seed N] [--workers N] [--out-dir D] [--budget-seconds S]
    lab list
    lab describe <experiment>
    lab verify --suite structural [--seed N]

Exit codes: 0 success, 2 invalid configuration, 3 runtime budget exceeded
(partial results are flushed), 1 verification failure.
"""

from __future__ import annotations

import argparse
import inspect
import os
import sys
import time

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import experiments, oracles
from .rng import RngStream, hash64

_TOP_KEYS = {"experiment", "seed", "workers", "out_dir", "budget_seconds",
             "params"}


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("config needs an 'experiment' key")
    name = raw["experiment"]
    if name not in experiments.EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; see 'lab list'")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'params' must be a table")
    sig = inspect.signature(experiments.EXPERIMENTS[name].runner)
    allowed = {p for p in sig.parameters if p not in ("rng", "_ignored")}
    bad = set(params) - allowed
    if bad:
        raise ConfigError(
            f"unknown params for {name}: {sorted(bad)}; allowed: {sorted(allowed)}")
    if "seed" in raw and not isinstance(raw["seed"], int):
        raise ConfigError("'seed' must be an integer")
    return raw


def _workers(args_workers, config_workers) -> int:
    if args_workers is not None:
        return args_workers
    if config_workers is not None:
        return int(config_workers)
    env = os.environ.get("LAB_WORKERS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, tomllib.TOMLDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    name = cfg["experiment"]
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out_dir = args.out_dir or cfg.get("out_dir", "lab-out")
    budget = args.budget_seconds or cfg.get("budget_seconds")
    workers = _workers(args.workers, cfg.get("workers"))
    params = dict(cfg.get("params", {}))
    params.setdefault("workers", workers)
    # task seed derivation: hash64(base_seed, task_index); index 0 = the run
    rng = RngStream(hash64(seed, 0))
    t0 = time.monotonic()
    if budget:
        params.setdefault("deadline", t0 + float(budget))
    try:
        result = experiments.run_experiment(name, rng, params)
    except Exception as e:  # configuration errors surfaced by drivers
        print(f"run failed: {e}", file=sys.stderr)
        return 2
    csv_path, json_path = result.write(out_dir)
    elapsed = time.monotonic() - t0
    print(f"{name}: {len(result.rows)} rows -> {csv_path}")
    print(f"summary -> {json_path}")
    for c in result.checks:
        print(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}")
    truncated = result.summary.get("truncated", False)
    print(f"elapsed {elapsed:.1f}s" + (" (budget exceeded)" if truncated else ""))
    return 3 if truncated else 0


def cmd_list(_args) -> int:
    for name in sorted(experiments.EXPERIMENTS):
        print(name)
    return 0


def cmd_describe(args) -> int:
    spec = experiments.EXPERIMENTS.get(args.experiment)
    if spec is None:
        print(f"unknown experiment {args.experiment!r}", file=sys.stderr)
        return 2
    print(args.experiment)
    print(spec.description)
    sig = inspect.signature(spec.runner)
    knobs = [p.name for p in sig.parameters.values()
             if p.name not in ("rng", "_ignored") and p.kind is p.KEYWORD_ONLY
             or p.default is not p.empty]
    print("parameters:", ", ".join(knobs))
    return 0


def cmd_verify(args) -> int:
    if args.suite != "structural":
        print(f"unknown suite {args.suite!r}", file=sys.stderr)
        return 2
    rng = RngStream(hash64(args.seed, 1))
    failures = 0
    for i, (name, fn) in enumerate(oracles.STRUCTURAL_SUITE.items()):
        t0 = time.monotonic()
        passed, detail = fn(rng.substream(i))
        dt = time.monotonic() - t0
        print(f"[{'PASS' if passed else 'FAIL'}] {name} ({dt:.1f}s)")
        if not passed:
            print(f"    {detail}")
            failures += 1
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lab",
        description="Batch experiment runner for the 4d spanning-tree "
                    "simulation laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a TOML config")
    run.add_argument("config", help="path to the TOML configuration")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--out-dir", default=None)
    run.add_argument("--budget-seconds", type=float, default=None)
    run.set_defaults(fn=cmd_run)

    lst = sub.add_parser("list", help="list available experiments")
    lst.set_defaults(fn=cmd_list)

    desc = sub.add_parser("describe", help="describe one experiment")
    desc.add_argument("experiment")
    desc.set_defaults(fn=cmd_describe)

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("--suite", default="structural")
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
