"""Command-line entry point.

Subcommands:
  run-scenario <file> [--seed N] [--out-dir DIR]   simulate and write artifacts
  bench-auth [--n N ...] [--revoked-frac F] [--trials T] [--out-dir DIR]
  calc-overhead --n N --m M --i I --j J            closed-form overhead model
  dump-chain <file>                                 decode a persisted chain
  emit-plots [--scores CSV] [--bench CSV] [--out-dir DIR]

run-scenario exits non-zero if any in-run invariant probe fails.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from vanetrust import kernel
from vanetrust.ledger import CHAIN_NAMES, read_chain_file
from vanetrust.protocol import ProtocolError, describe_record
from vanetrust.simkit.bench import BENCH_HEADER, bench_auth, fit_log, write_bench_csv
from vanetrust.simkit.engine import run_scenario
from vanetrust.simkit.overhead import calc_overhead
from vanetrust.simkit.plots import emit_plots
from vanetrust.simkit.scenario import ScenarioError, load_scenario

DEFAULT_BENCH_SIZES = [2**10, 2**14, 2**17, 2**20]


def _cmd_run_scenario(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    out_dir = Path(args.out_dir or f"runs/{scenario.name}-seed{scenario.seed}")
    result = run_scenario(scenario, out_dir)
    print(f"scenario '{scenario.name}' seed {scenario.seed} -> {out_dir}")
    print(f"  broadcasts: {result.accepted_broadcasts} accepted,"
          f" {result.rejected_broadcasts} rejected")
    for name, score in sorted(result.final_scores.items()):
        print(f"  final score {name}: {score:.4f}")
    for probe, ok in sorted(result.probes.items()):
        print(f"  probe {probe}: {'pass' if ok else 'FAIL'}")
    return 0 if result.ok else 1


def _cmd_bench_auth(args) -> int:
    sizes = args.n or DEFAULT_BENCH_SIZES
    try:
        rows = bench_auth(sizes, revoked_fraction=args.revoked_frac, trials=args.trials)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"kernel backend: {kernel.backend()}")
    print(BENCH_HEADER)
    for row in rows:
        print(row.csv_line())
    if len(rows) >= 2:
        a, b, r2 = fit_log(rows)
        print(f"fit: measured_ms = {a:.6f} + {b:.6f}*(log2 n + log2 m), R^2 = {r2:.4f}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_bench_csv(rows, out / "bench.csv")
        print(f"wrote {out / 'bench.csv'}")
    return 0


def _cmd_calc_overhead(args) -> int:
    try:
        report = calc_overhead(args.n, args.m, args.i, args.j)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.lines():
        print(line)
    return 0


def _cmd_dump_chain(args) -> int:
    try:
        chain_id, blocks = read_chain_file(args.chain_file)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{CHAIN_NAMES[chain_id]} ({len(blocks)} blocks)")
    for height, block in enumerate(blocks, start=1):
        h = block.header
        print(f"block {height}: time={h.timestamp} nonce={h.nonce}"
              f" records={len(block.records)}")
        print(f"  payload_root={h.payload_root.hex()}")
        print(f"  hash={h.block_hash().hex()}")
        for record in block.records:
            try:
                text = describe_record(record)
            except ProtocolError:
                text = f"opaque record ({len(record)} bytes)"
            for line in text.splitlines():
                print(f"    {line}")
    return 0


def _cmd_emit_plots(args) -> int:
    try:
        produced = emit_plots(args.out_dir, scores_csv=args.scores, bench_csv=args.bench)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in produced:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vanetrust",
        description="Anonymous-authentication trust stack: simulator and analysis tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-scenario", help="simulate a scenario file")
    p.add_argument("scenario", help="path to a scenario YAML file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out-dir", default=None, help="artifact directory")
    p.set_defaults(func=_cmd_run_scenario)

    p = sub.add_parser("bench-auth", help="time authentication across ledger scales")
    p.add_argument("--n", type=int, action="append",
                   help="certificate count; repeatable (default 2^10,2^14,2^17,2^20)")
    p.add_argument("--revoked-frac", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--out-dir", default=None, help="also write bench.csv here")
    p.set_defaults(func=_cmd_bench_auth)

    p = sub.add_parser("calc-overhead", help="evaluate the closed-form overhead model")
    p.add_argument("--n", type=int, required=True, help="issued certificates")
    p.add_argument("--m", type=int, required=True, help="revoked keys")
    p.add_argument("--i", type=float, required=True, help="packets/s received")
    p.add_argument("--j", type=float, required=True, help="new-key packets/s")
    p.set_defaults(func=_cmd_calc_overhead)

    p = sub.add_parser("dump-chain", help="decode a persisted chain file")
    p.add_argument("chain_file")
    p.set_defaults(func=_cmd_dump_chain)

    p = sub.add_parser("emit-plots", help="render charts from run/bench CSVs")
    p.add_argument("--scores", default=None, help="scores.csv from run-scenario")
    p.add_argument("--bench", default=None, help="bench.csv from bench-auth")
    p.add_argument("--out-dir", default="plots")
    p.set_defaults(func=_cmd_emit_plots)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream reader went away (dump-chain | head); exit quietly
        # instead of tracebacking, and point stdout at devnull so the
        # interpreter's shutdown flush does not raise again
        try:
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        except (OSError, ValueError):
            pass
        return 1


if __name__ == "__main__":
    sys.exit(main())
