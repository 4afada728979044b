"""Command line entry point: ``roughdrift <experiment> --config FILE`` or ``roughdrift run FILE``."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, ConvergenceError, DomainError
from .experiments import EXPERIMENTS, REQUIRED, SCHEMA_VERSION, config_hash, resolve_config, run_experiment

EXIT_OK, EXIT_GATE, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: config output_dir or ./out/<experiment>)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roughdrift", description="Run rough-drift numerical experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ls = sub.add_parser("list", help="list experiments")
    ls.add_argument("--json", action="store_true")
    run = sub.add_parser("run", help="run the experiment named in a config file")
    run.add_argument("config")
    _common(run)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None)
        _common(p)
    return parser


def list_experiments(as_json: bool = False) -> str:
    rows = [{"name": n, "required_keys": REQUIRED[n], "runtime": EXPERIMENTS[n][1]} for n in EXPERIMENTS]
    if as_json:
        return json.dumps(rows, indent=2)
    lines = [f"{'experiment':<10} {'runtime':<8} required keys"]
    lines += [f"{r['name']:<10} {r['runtime']:<8} {', '.join(r['required_keys']) or '-'}" for r in rows]
    return "\n".join(lines)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc


def write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def execute(name: str, raw: dict, seed: int | None, threads: int | None, out: str | None) -> int:
    name, cfg, cfg_seed = resolve_config(raw, name)
    seed = cfg_seed if seed is None else seed
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    if threads is None and os.environ.get("ROUGHDRIFT_THREADS"):
        threads = int(os.environ["ROUGHDRIFT_THREADS"])
    if threads is not None and threads < 1:
        raise ConfigError("--threads must be positive")
    outdir = Path(out or raw.get("output_dir") or Path("out") / name)
    outdir.mkdir(parents=True, exist_ok=True)

    digest = config_hash({"experiment": name, **cfg})
    try:
        outcome, elapsed = run_experiment(name, cfg, seed, threads)
    except ConvergenceError as exc:
        from .experiments import Outcome

        outcome, elapsed = Outcome(), 0.0
        outcome.gate("convergence", False, str(exc))
    for table, (header, rows) in outcome.tables.items():
        write_table(outdir / f"{table}.csv", header, rows)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": name,
        "config_hash": digest,
        "seed": seed,
        "config": cfg,
        "passed": outcome.passed,
        "criteria": outcome.criteria,
        "results": outcome.results,
        "tables": sorted(f"{t}.csv" for t in outcome.tables),
        "runtime_seconds": round(elapsed, 3),
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for c in outcome.criteria:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']}")
    if not outcome.passed:
        failing = [c["name"] for c in outcome.criteria if not c["passed"]]
        print(f"gate failure: {', '.join(failing)}", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print(list_experiments(args.json))
        return EXIT_OK
    try:
        if args.command == "run":
            raw = load_config(args.config)
            return execute(None, raw, args.seed, args.threads, args.out)
        raw = load_config(args.config) if args.config else {}
        return execute(args.command, raw, args.seed, args.threads, args.out)
    except (ConfigError, DomainError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
