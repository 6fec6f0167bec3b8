"""Command-line entry point.

    batchbackoff run --policy beb --n 150 --seed 7 --payload 64
    batchbackoff sweep --config sweep.json --out results/
    batchbackoff verify claims --seed 1 --out results/claims
    batchbackoff export-trace --policy stb --n 20 --seed 3 --out trace.ndjson

Every random draw descends from ``--seed``; when it is omitted a seed is
drawn from system entropy and echoed on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
from typing import Optional, Sequence

from .costmodel import PacketShape, decompose, simple_time_of, worst_station_ack_wait
from .domain import ParameterError, PolicySpec, TimingParams
from .engine import ENGINES, RunawayTrial, TrialConfig, run_trial, simulate, write_trace
from .harness import METRICS, MODES, SweepSpec, TrialError, parse_n_values, run_sweep
from .verify import SUITES, run_suite


class UsageError(Exception):
    pass


def _seed(value: Optional[int]) -> int:
    if value is None:
        value = secrets.randbits(63)
        print(f"seed: {value}", file=sys.stderr)
    return value


def _policy_arg(text: str) -> PolicySpec:
    try:
        return PolicySpec.parse(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batchbackoff", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one trial and print its statistics and cost")
    run.add_argument("--policy", type=_policy_arg, required=True)
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--payload", type=int, default=64, help="payload bytes (default 64)")
    run.add_argument("--mode", choices=MODES, default="abstract",
                     help="dcf caps windows at the timing max_window (1024)")
    run.add_argument("--engine", choices=ENGINES, default="slot")

    sweep = sub.add_parser("sweep", help="run a seeded sweep and write CSV/JSON")
    sweep.add_argument("--config", help="flat JSON config; flags override its values")
    sweep.add_argument("--n-values", help="'50,100,150' or 'start:stop:step'")
    sweep.add_argument("--policies", help="comma list, e.g. beb,lb,llb,stb,bestof:5")
    sweep.add_argument("--trials", type=int)
    sweep.add_argument("--payload", type=int, dest="payload_bytes")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--metrics", help=f"comma list from {sorted(METRICS)}")
    sweep.add_argument("--engine", choices=ENGINES)
    sweep.add_argument("--mode", choices=MODES)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--name", default="sweep")
    sweep.add_argument("--workers", type=int)

    verify = sub.add_parser("verify", help="run a named acceptance suite")
    verify.add_argument("suite", choices=sorted(SUITES))
    verify.add_argument("--seed", type=int)
    verify.add_argument("--out")
    verify.add_argument("--workers", type=int)

    export = sub.add_parser("export-trace", help="run one trial and write its slot trace")
    export.add_argument("--policy", type=_policy_arg, required=True)
    export.add_argument("--n", type=int, required=True)
    export.add_argument("--seed", type=int)
    export.add_argument("--mode", choices=MODES, default="abstract")
    export.add_argument("--out", required=True)
    return parser


def _cmd_run(args) -> int:
    params = TimingParams()
    policy = args.policy.with_cap(params.max_window) if args.mode == "dcf" else args.policy
    config = TrialConfig(args.n, policy, _seed(args.seed))
    stats = simulate(config, args.engine)
    shape = PacketShape(args.payload, params.packet_overhead_bytes)
    out = {
        "config": config.to_dict(),
        "stats": stats.to_dict(),
        "cost": decompose(stats, shape, params).to_dict(),
        "simple_time_us": round(simple_time_of(stats, shape, params), 2),
        "worst_station_ack_wait_us": worst_station_ack_wait(stats, params),
    }
    print(json.dumps(out, sort_keys=True))
    return 0


def _sweep_spec(args) -> SweepSpec:
    flat = {}
    if args.config:
        try:
            with open(args.config) as fp:
                flat = json.load(fp)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(flat, dict):
            raise UsageError("config must be a JSON object")
    overrides = {
        "n_values": args.n_values, "policies": args.policies, "trials": args.trials,
        "payload_bytes": args.payload_bytes, "seed": args.seed, "metrics": args.metrics,
        "engine": args.engine, "mode": args.mode,
    }
    flat.update({k: v for k, v in overrides.items() if v is not None})
    if "n_values" in flat and isinstance(flat["n_values"], str):
        flat["n_values"] = parse_n_values(flat["n_values"])
    flat["seed"] = _seed(flat.get("seed"))
    return SweepSpec.from_flat(flat)


def _cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    result = run_sweep(spec, args.workers)
    for path in result.write(args.out, args.name):
        print(path)
    return 0


def _cmd_verify(args) -> int:
    seed = _seed(args.seed)
    run = run_suite(args.suite, seed, args.workers, args.out)
    print(f"suite {args.suite} (seed {seed})")
    print(run.table())
    print(f"{sum(c.passed for c in run.checks)}/{len(run.checks)} checks passed")
    return 0 if run.passed else 1


def _cmd_export(args) -> int:
    params = TimingParams()
    policy = args.policy.with_cap(params.max_window) if args.mode == "dcf" else args.policy
    trace = run_trial(TrialConfig(args.n, policy, _seed(args.seed)))
    directory = os.path.dirname(args.out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(args.out, "w", newline="") as fp:
        write_trace(trace, fp)
    print(args.out)
    return 0


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "verify": _cmd_verify,
             "export-trace": _cmd_export}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ParameterError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RunawayTrial, TrialError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
