"""Command-line interface for the benchmark harness.

One subcommand per experiment; each writes a result CSV, a summary CSV and
a JSON sidecar holding the fully resolved configuration.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .recovery import NumericalFailureError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parse_override(text: str):
    if "=" not in text:
        raise bench.ConfigError(f"override {text!r}: expected key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings are allowed unquoted
    return key.strip(), value


def _set_path(cfg: dict, dotted: str, value):
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise bench.ConfigError(f"{dotted}: unknown configuration field")
        node = node[part]
    if parts[-1] not in node:
        raise bench.ConfigError(f"{dotted}: unknown configuration field")
    node[parts[-1]] = value


def build_config(experiment: str, args) -> dict:
    cfg = bench.default_config(experiment)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise bench.ConfigError(f"config: cannot read {args.config}: {exc}")
        cfg = bench.merge_config(cfg, loaded)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    for item in args.override or []:
        key, value = _parse_override(item)
        _set_path(cfg, key, value)
    return bench.validate_config(cfg)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindtomo",
        description="Blind quantum tomography benchmark experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "gue-phase": "recovery-rate phase transition for GUE measurements",
        "pauli-blind": "blind tomography from sub-sampled Pauli measurements",
        "coherent-als": "ALS blind tomography under coherent Pauli errors",
        "rip-probe": "sampled lower bound on the restricted isometry constant",
        "oracle-tests": "quick projection/adjoint self-check battery",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (partial override)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", default=f"{name}.csv", help="output CSV path")
        p.add_argument("--workers", type=int, help="parallel trial workers")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="dotted config override, e.g. sdt.max_iters=300")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    experiment = ("unit-oracles" if args.command == "oracle-tests"
                  else args.command)
    try:
        cfg = build_config(experiment, args)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        rows = bench.run_experiment(cfg)
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = Path(args.out)
    try:
        out.write_text(bench.rows_to_csv(rows))
        out.with_suffix(out.suffix + ".json").write_text(bench.sidecar_json(cfg))
        summary = bench.aggregate(rows)
        out.with_name(out.stem + ".summary.csv").write_text(
            bench.summary_to_csv(summary))
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1

    for line in bench.summary_to_csv(summary).splitlines():
        print(line)
    if experiment == "unit-oracles" and not all(r["success"] for r in rows):
        print("oracle checks failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
