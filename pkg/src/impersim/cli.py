"""simctl: run scenarios, Monte Carlo campaigns, similarity chains, replays.

Exit codes: 0 all properties pass, 1 a protocol property failed, 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .chainlab import (
    DEFAULT_MAX_N,
    DEFAULT_MAX_R,
    build_full_chain,
    verify_similar,
)
from .engine import emit_trace, load_trace, replay_decisions, TraceDecision
from .errors import ConfigError, HorizonExceeded, SimError
from .protocols import FullInfoProtocol
from .scenario import (
    build_protocol,
    load_scenario,
    materialize_inputs,
    monte_carlo,
    run_scenario,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _chain_caps() -> tuple[int, int]:
    override = os.environ.get("SIMCTL_MAX_CHAIN")
    if not override:
        return DEFAULT_MAX_N, DEFAULT_MAX_R
    parts = override.split(",")
    if len(parts) == 1:
        return int(parts[0]), int(parts[0])
    return int(parts[0]), int(parts[1])


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    report = run_scenario(scenario)
    if args.trace:
        emit_trace(report.trace, args.trace)
    summary = report.summary()
    if args.trace:
        summary["trace"] = str(args.trace)
    print(json.dumps(summary, indent=2))
    for name, ok in sorted(report.verdicts.items()):
        note = report.details.get(name, "")
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({note})" if note else ""))
    return EXIT_OK if report.all_pass else EXIT_VIOLATION


def cmd_montecarlo(args) -> int:
    scenario = load_scenario(args.scenario)
    aggregate = monte_carlo(scenario, args.runs, args.seed_base)
    print(json.dumps(aggregate, indent=2))
    return EXIT_OK if not aggregate["failures"] else EXIT_VIOLATION


def cmd_chain(args) -> int:
    max_n, max_r = _chain_caps()
    if args.rounds < 1:
        raise ConfigError("rounds", "horizon must be >= 1")
    if args.n < 2:
        raise ConfigError("n", "need at least two processors")
    try:
        start, steps = build_full_chain(
            args.n, args.rounds, max_n=max_n, max_r=max_r, force=args.force
        )
    except HorizonExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graphs = [start] + [s.graph for s in steps]
    for idx, graph in enumerate(graphs):
        (out / f"g_{idx:04d}.json").write_text(json.dumps(graph.to_json(), indent=1))
    manifest = {
        "n": args.n,
        "rounds": args.rounds,
        "length": len(steps),
        "ops": [list(map(str, s.op)) for s in steps],
        "start_fingerprint": start.fingerprint(),
        "end_fingerprint": graphs[-1].fingerprint(),
        "start_inputs": list(start.inputs),
        "end_inputs": list(graphs[-1].inputs),
    }
    (out / "chain.json").write_text(json.dumps(manifest, indent=1))
    failures = 0
    if args.verify:
        protocol = FullInfoProtocol()
        for a, b in zip(graphs, graphs[1:]):
            similar, differing = verify_similar(a, b, protocol)
            if not similar:
                failures += 1
                print(f"FAIL similarity: {a.fingerprint()} vs {b.fingerprint()} {sorted(differing)}")
        manifest["verified_pairs"] = len(steps)
        manifest["similarity_failures"] = failures
    print(json.dumps(manifest if not args.verify else {**manifest, "ops": "..."}, indent=2))
    return EXIT_OK if failures == 0 else EXIT_VIOLATION


def cmd_replay(args) -> int:
    scenario = load_scenario(args.scenario)
    trace = load_trace(args.trace)
    protocol = build_protocol(scenario)
    inputs = materialize_inputs(scenario)
    replayed = replay_decisions(protocol, inputs, trace)
    recorded = {
        e.pid: (e.value, e.round_no) for e in trace if isinstance(e, TraceDecision)
    }
    got = {pid: (d.value, d.round_no) for pid, d in replayed.items()}
    match = recorded == got
    print(
        json.dumps(
            {
                "recorded": {p.tag: v for p, v in sorted(recorded.items())},
                "replayed": {p.tag: v for p, v in sorted(got.items())},
                "match": match,
            },
            indent=2,
        )
    )
    return EXIT_OK if match else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simctl",
        description="Simulate synchronous protocols under identity-forging adversaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one scenario and check its invariants")
    run.add_argument("--scenario", required=True)
    run.add_argument("--trace", help="write the delivery trace as JSONL")
    run.set_defaults(func=cmd_run)

    mc = sub.add_parser("montecarlo", help="run a seeded campaign")
    mc.add_argument("--scenario", required=True)
    mc.add_argument("--runs", type=int, required=True)
    mc.add_argument("--seed-base", type=int, required=True)
    mc.set_defaults(func=cmd_montecarlo)

    chain = sub.add_parser("chain", help="build (and verify) a similarity chain")
    chain.add_argument("--n", type=int, required=True)
    chain.add_argument("--rounds", type=int, required=True)
    chain.add_argument("--out", required=True)
    chain.add_argument("--verify", action="store_true")
    chain.add_argument("--force", action="store_true", help="ignore the size caps")
    chain.set_defaults(func=cmd_chain)

    rp = sub.add_parser("replay", help="re-derive decisions from a recorded trace")
    rp.add_argument("--trace", required=True)
    rp.add_argument("--scenario", required=True)
    rp.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
