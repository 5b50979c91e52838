"""Command-line tooling: headless runs, latency benchmarks, data export.

Exit codes: 0 success, 2 invalid config, 3 unreadable model, 4 export
from an empty stack.

    mrme run --config exp.ini --out results/ [--seed 7] [--save-model m.mrme]
    mrme bench --model m.mrme --queries 10000
    mrme export-bootstrap --model m.mrme --env mountain_car --episodes 10 --out data.jsonl
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, default_config_text, load_config
from .envs import make_env
from .experiment import run_experiment
from .policy import demo_stack_policy, stack_stats, stats_text
from .serialize import ModelFormatError, load_stack, save_stack
from .session import Session, SessionConfig, metrics_to_csv

EXIT_BAD_CONFIG = 2
EXIT_BAD_MODEL = 3
EXIT_EMPTY_STACK = 4


def _cmd_run(args: argparse.Namespace) -> int:
    if args.print_config:
        sys.stdout.write(default_config_text())
        return 0
    if args.config is None:
        print("run: --config is required (or use --print-config)", file=sys.stderr)
        return EXIT_BAD_CONFIG
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    session, timeline = run_experiment(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "metrics.csv"
    csv_path.write_text(metrics_to_csv(timeline), encoding="utf-8")
    print(f"wrote {csv_path} ({len(timeline)} episodes)")
    if args.save_model:
        save_stack(session.stack, args.save_model)
        print(f"wrote {args.save_model}")
    stats_path = out_dir / "stats.txt"
    stats_path.write_text(stats_text(stack_stats(session.stack)), encoding="utf-8")
    solved = sum(1 for m in timeline if m.solved)
    print(f"solved {solved}/{len(timeline)} episodes")
    return 0


def _random_query(obs_space, action_space, n, rng):
    history_len = int(rng.integers(0, n + 1))
    history = [action_space.sample(rng) for _ in range(history_len)]
    return obs_space.sample(rng), history


def _cmd_bench(args: argparse.Namespace) -> int:
    try:
        stack = load_stack(args.model)
    except (OSError, ModelFormatError) as exc:
        print(f"cannot load model: {exc}", file=sys.stderr)
        return EXIT_BAD_MODEL

    if stack.ensembles:
        schema = stack.ensembles[0].schema
        obs_space, action_space = schema.obs_space, schema.action_space
        n = stack.ensembles[0].n
    elif stack.fallback.action_space is not None and args.env:
        env = make_env(args.env)
        obs_space, action_space, n = env.spec.observation, env.spec.action, 0
    else:
        print("empty model without an --env to sample queries from", file=sys.stderr)
        return EXIT_BAD_MODEL

    rng = np.random.default_rng(args.seed)
    queries = [
        _random_query(obs_space, action_space, n, rng) for _ in range(args.queries)
    ]
    lookups_before = stack.counter.lookups
    matched = 0
    latencies = np.empty(len(queries))
    for idx, (obs, history) in enumerate(queries):
        t0 = time.perf_counter_ns()
        decision = demo_stack_policy(stack, obs, history, rng)
        latencies[idx] = time.perf_counter_ns() - t0
        if decision.matched:
            matched += 1
    lookups = stack.counter.lookups - lookups_before
    bound = max(1, len(stack)) * (n + 1) * ((stack.ensembles[0].k + 1) if stack.ensembles else 1)

    p50, p99 = np.percentile(latencies, [50, 99])
    print(f"queries={len(queries)}")
    print(f"matched={matched}")
    print(f"p50_us={p50 / 1000:.2f}")
    print(f"p99_us={p99 / 1000:.2f}")
    print(f"max_us={latencies.max() / 1000:.2f}")
    print(f"lookups={lookups}")
    print(f"lookups_per_query={lookups / max(1, len(queries)):.2f}")
    print(f"lookup_bound_per_query={bound}")
    return 0


def _cmd_export_bootstrap(args: argparse.Namespace) -> int:
    try:
        stack = load_stack(args.model)
    except (OSError, ModelFormatError) as exc:
        print(f"cannot load model: {exc}", file=sys.stderr)
        return EXIT_BAD_MODEL
    if len(stack) == 0:
        print("model holds no demonstrations; nothing to bootstrap", file=sys.stderr)
        return EXIT_EMPTY_STACK

    n = stack.ensembles[0].n
    session = Session(
        SessionConfig(env_id=args.env, n=n, seed=args.seed, baseline_episodes=0),
        stack=stack,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        written = session.bootstrap_export(args.episodes, fh)
    print(f"wrote {args.out} ({written} records)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrme", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a headless experiment from a config file")
    run.add_argument("--config", type=Path)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--seed", type=int, default=None, help="override config seed")
    run.add_argument("--save-model", type=Path, default=None)
    run.add_argument("--print-config", action="store_true",
                     help="print every default and exit")
    run.set_defaults(fn=_cmd_run)

    bench = sub.add_parser("bench", help="measure per-decision latency of a model")
    bench.add_argument("--model", type=Path, required=True)
    bench.add_argument("--queries", type=int, default=10000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--env", default=None, help="env id for empty models")
    bench.set_defaults(fn=_cmd_bench)

    export = sub.add_parser("export-bootstrap",
                            help="roll out a model to generate training data")
    export.add_argument("--model", type=Path, required=True)
    export.add_argument("--env", required=True)
    export.add_argument("--episodes", type=int, required=True)
    export.add_argument("--out", type=Path, required=True)
    export.add_argument("--seed", type=int, default=0)
    export.set_defaults(fn=_cmd_export_bootstrap)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
