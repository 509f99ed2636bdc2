"""Command-line entry points.

Subcommands:
  generate  write a synthetic payment day as CSV
  run       replay a day under a scenario and write the run manifest
  report    turn a manifest into report JSON and series CSVs
  verify    run the built-in invariant and oracle checks

Config files use INI syntax with [generate], [run] and [solver] sections;
command-line flags override file values. All rejections print a diagnostic
to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

from . import __version__
from .data import DEFAULT_ARRIVAL_PROFILE, SyntheticDayConfig, generate_day, load_day, save_day
from .errors import LiqoptError
from .pipeline import SCENARIOS, load_manifest, run_day, write_manifest
from .reporting import SERIES_KINDS, emit_series, format_csv, report_from_manifest
from .solvers import KINDS, NEIGHBORHOODS, SolverConfig
from .verify import run_checks


def _load_config(path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path:
        if not Path(path).exists():
            raise LiqoptError(f"config file not found: {path}")
        parser.read(path)
    return parser


def _get(cfg: configparser.ConfigParser, section: str, key: str, cast, fallback):
    if cfg.has_option(section, key):
        raw = cfg.get(section, key)
        if cast is bool:
            return cfg.getboolean(section, key)
        return cast(raw)
    return fallback


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    sec = "generate"
    profile = _get(cfg, sec, "arrival_profile", _floats, DEFAULT_ARRIVAL_PROFILE)
    day_cfg = SyntheticDayConfig(
        num_participants=_get(cfg, sec, "num_participants", int, args.participants),
        target_volume=args.volume if args.volume is not None
        else _get(cfg, sec, "target_volume", int, 5000),
        value_shape=_get(cfg, sec, "value_shape", float, 1.5),
        value_scale=_get(cfg, sec, "value_scale", int, 10_000),
        arrival_profile=profile,
        payer_weights=_get(cfg, sec, "payer_weights", _floats, None),
        payee_weights=_get(cfg, sec, "payee_weights", _floats, None),
        day_start_hour=_get(cfg, sec, "day_start_hour", int, 8),
        day_end_hour=_get(cfg, sec, "day_end_hour", int, 18),
        seed=args.seed if args.seed is not None else _get(cfg, sec, "seed", int, 0),
    )
    payments = generate_day(day_cfg)
    save_day(payments, args.output)
    print(f"wrote {len(payments)} payments to {args.output}")
    return 0


def _solver_from(cfg: configparser.ConfigParser, args) -> SolverConfig:
    sec = "solver"
    return SolverConfig(
        kind=args.solver or _get(cfg, sec, "kind", str, "local-search"),
        num_samples=args.samples if args.samples is not None
        else _get(cfg, sec, "num_samples", int, 50),
        sweeps=args.sweeps if args.sweeps is not None
        else _get(cfg, sec, "sweeps", int, 1000),
        initial_temperature=_get(cfg, sec, "initial_temperature", float, None),
        final_temperature=_get(cfg, sec, "final_temperature", float, None),
        neighborhood=args.neighborhood
        or _get(cfg, sec, "neighborhood", str, "any-swap"),
        seed=args.seed if args.seed is not None else _get(cfg, sec, "seed", int, 0),
        time_limit=_get(cfg, sec, "time_limit", float, None),
        exact_limit=_get(cfg, sec, "exact_limit", int, 9),
        base_unit=args.base_unit if args.base_unit is not None
        else _get(cfg, sec, "base_unit", int, None),
    )


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    payments = load_day(args.input)
    solver = _solver_from(cfg, args)
    run = run_day(
        payments,
        scenario=args.scenario,
        solver_config=solver,
        batch_size=args.batch_size,
        fallback=not args.no_fallback,
        min_solve_size=args.min_solve_size,
        solve_delay=args.solve_delay,
    )
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest_path = outdir / "manifest.json"
    write_manifest(run, manifest_path)
    improved = sum(
        1 for r in run.records if r.classification.value == "improved"
    )
    print(
        f"settled {sum(len(r.batch) for r in run.records)} payments in "
        f"{len(run.records)} batches; improved {improved}; "
        f"end-of-day savings {run.end_of_day_savings} cents"
    )
    print(f"manifest: {manifest_path}")
    return 0


def _cmd_report(args) -> int:
    manifest = load_manifest(args.manifest)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = report_from_manifest(manifest)
    report_path = outdir / "report.json"
    report_path.write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    print(f"report: {report_path}")
    for kind in args.series or []:
        if kind == "batch-balances":
            idx = args.batch_index if args.batch_index is not None else 0
            header, rows = emit_series(manifest, kind, idx)
            name = f"batch_balances_{idx}.csv"
        else:
            header, rows = emit_series(manifest, kind)
            name = kind.replace("-", "_") + ".csv"
        (outdir / name).write_text(format_csv(header, rows))
        print(f"series: {outdir / name}")
    return 0


def _cmd_verify(args) -> int:
    failures = 0
    for name, ok, detail in run_checks(seed=args.seed if args.seed is not None else 0):
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} check(s) failed", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liqopt",
        description="Reorder interbank payment batches to cut liquidity needs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic payment day as CSV")
    gen.add_argument("--output", "-o", required=True, help="CSV file to write")
    gen.add_argument("--config", help="INI config file ([generate] section)")
    gen.add_argument("--volume", type=int, help="target payments per day")
    gen.add_argument("--participants", type=int, default=14)
    gen.add_argument("--seed", type=int)
    gen.set_defaults(func=_cmd_generate)

    runp = sub.add_parser("run", help="replay a day and write the run manifest")
    runp.add_argument("--input", "-i", required=True, help="payment day CSV")
    runp.add_argument("--output-dir", "-o", required=True)
    runp.add_argument("--config", help="INI config file ([solver] section)")
    runp.add_argument("--batch-size", type=int, default=70)
    runp.add_argument("--scenario", choices=SCENARIOS, default="day-race")
    runp.add_argument("--solver", choices=KINDS)
    runp.add_argument("--seed", type=int)
    runp.add_argument("--samples", type=int, help="solver restarts per batch")
    runp.add_argument("--sweeps", type=int, help="annealing sweeps per restart")
    runp.add_argument("--base-unit", type=int,
                      help="sa-qubo top-up granularity in cents (default: auto)")
    runp.add_argument(
        "--neighborhood", choices=NEIGHBORHOODS, default=None,
        help="local-search swap neighborhood",
    )
    runp.add_argument("--min-solve-size", type=int, default=None,
                      help="batches smaller than this settle FIFO (default: batch size)")
    runp.add_argument("--solve-delay", type=float, default=0.0,
                      help="synthetic per-batch solver latency recorded in the manifest")
    runp.add_argument("--no-fallback", action="store_true",
                      help="disable the per-batch FIFO fallback guard")
    runp.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="tables and series from a manifest")
    rep.add_argument("--manifest", "-m", required=True)
    rep.add_argument("--output-dir", "-o", required=True)
    rep.add_argument("--series", action="append", choices=SERIES_KINDS,
                     help="emit a plot-data CSV (repeatable)")
    rep.add_argument("--batch-index", type=int,
                     help="batch to dump for batch-balances")
    rep.set_defaults(func=_cmd_report)

    ver = sub.add_parser("verify", help="run built-in invariant/oracle checks")
    ver.add_argument("--seed", type=int)
    ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LiqoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
