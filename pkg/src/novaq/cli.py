"""Command line entry point: ``novaq generate|faults|growth|report``.

Exit codes: 0 success, 2 configuration error, 3 input-artifact error
(missing or malformed suite/manifest, empty suite, qubit-count mismatch).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from novaq.campaign import (
    consolidate,
    detection_files,
    evaluate_program,
    generate_files,
    growth_curves,
    growth_files,
    load_config,
    programs_for_width,
    read_suite,
    run_generate,
    write_files,
)
from novaq.circuits import BENCHMARK_NAMES
from novaq.errors import ConfigurationError, InputArtifactError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3


def _settings(args):
    settings = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = args.mode
    if overrides:
        camp = dataclasses.replace(settings.campaign, **overrides).validate()
        settings = dataclasses.replace(settings, campaign=camp)
    return settings


def _stamp(out: Path, started: datetime):
    # wall-clock times stay out of the CSV/JSON outputs so replays are byte-identical
    finished = datetime.now(timezone.utc)
    (out / "timestamps.txt").write_text(f"started {started.isoformat()}\nfinished {finished.isoformat()}\n")


def cmd_generate(args) -> int:
    settings = _settings(args)
    result = run_generate(settings.campaign, args.checkpoint_interval)
    files = generate_files(result, settings, args.checkpoint_interval)
    write_files(args.out, files)
    occ, rate = result.archive.coverage()
    print(f"{settings.campaign.mode}: {len(result.cases)} cases, {occ} cells ({100 * rate:.1f}%) -> {args.out}")
    return EXIT_OK


def cmd_faults(args) -> int:
    settings = _settings(args)
    states = read_suite(args.suite)
    n = states.shape[1].bit_length() - 1
    programs = args.program or programs_for_width(n)
    for name in programs:
        if name not in BENCHMARK_NAMES:
            raise ConfigurationError(f"unknown program {name!r}; choose from {', '.join(BENCHMARK_NAMES)}")
    if not programs:
        raise InputArtifactError(f"no benchmark program has {n} qubits")
    results = [evaluate_program(name, states, settings, settings.campaign.seed) for name in programs]
    write_files(args.out, detection_files(results, settings, args.suite))
    for r in results:
        print(f"{r.program}: accuracy {100 * r.accuracy:.1f}% over {len(r.variants)} variants")
    return EXIT_OK


def cmd_growth(args) -> int:
    settings = _settings(args)
    if settings.campaign.total_budget < args.checkpoint_interval:
        raise ConfigurationError("total_budget must be at least the checkpoint interval")
    curve = growth_curves(settings.campaign, args.checkpoint_interval)
    write_files(args.out, growth_files(curve, settings, args.checkpoint_interval))
    last = curve[-1]
    print(f"{last[0]} cases: novaq {last[1]} cells, baseline {last[2]} cells -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    report, md = consolidate(args.runs)
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    write_files(args.out, {"report.json": json.dumps(report, indent=2, sort_keys=True) + "\n",
                           "report.md": md})
    print(md)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="novaq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, modes=True):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        if modes:
            p.add_argument("--mode", choices=("novaq", "baseline"))

    p = sub.add_parser("generate", help="generate a test suite and its coverage report")
    common(p)
    p.add_argument("--checkpoint-interval", type=int, default=100)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("faults", help="measure bug detection of a suite on faulty benchmarks")
    common(p, modes=False)
    p.add_argument("--suite", required=True, help="cases.csv from 'generate' (or its directory)")
    p.add_argument("--program", action="append", help=f"one of {', '.join(BENCHMARK_NAMES)}; repeatable")
    p.set_defaults(func=cmd_faults)

    p = sub.add_parser("growth", help="coverage growth of both generators")
    common(p, modes=False)
    p.add_argument("--checkpoint-interval", type=int, default=100)
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("report", help="merge run directories into one summary")
    p.add_argument("runs", nargs="+", help="run directories holding manifest.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = datetime.now(timezone.utc)
    try:
        code = args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputArtifactError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command != "report":
        _stamp(Path(args.out), started)
    return code


if __name__ == "__main__":
    sys.exit(main())
