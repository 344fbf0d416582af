"""Command line entry point: ``crowdfind {run,sweep,validate-analysis,fp-experiment}``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .analysis import VALIDATION_COLUMNS, format_table, validate_analysis
from .config import ConfigError, SimConfig, desk_scale, parse_config
from .harness import SweepSpec, aggregate, rows_to_csv, run_replicates, run_sweep


def _load_config(args) -> SimConfig:
    base = desk_scale() if args.desk else SimConfig()
    cfg = parse_config(Path(args.config).read_text(), base) if args.config else base
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicates is not None:
        changes["replicates"] = args.replicates
    if args.scheme is not None:
        changes["scheme"] = args.scheme
    return cfg.replace(**changes)


def _emit(text: str, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text, encoding="utf-8")
    print(f"wrote {path / name}", file=sys.stderr)


def _parse_values(raw: str) -> list[str]:
    return [v.strip() for v in raw.split(",") if v.strip()]


def cmd_run(args) -> int:
    cfg = _load_config(args)
    rows = run_replicates(cfg, workers=args.workers)
    _emit(rows_to_csv(rows + aggregate(rows)), args.out, "run.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    spec = SweepSpec(args.param, tuple(_parse_values(args.values)), cfg.replicates)
    _emit(run_sweep(spec, cfg, workers=args.workers), args.out, f"sweep_{args.param}.csv")
    return 0


def cmd_fp(args) -> int:
    cfg = _load_config(args).replace(fp_mode=True)
    rows = run_replicates(cfg, workers=args.workers)
    _emit(rows_to_csv(rows + aggregate(rows)), args.out, "fp_experiment.csv")
    rate = sum(bool(r["fp_triggered"]) for r in rows) / len(rows)
    print(f"false-positive rate: {rate:.4f} over {len(rows)} runs", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    rows = validate_analysis(seed=args.seed or 0, trials=args.trials)
    sys.stdout.write(format_table(rows))
    if args.out is not None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=VALIDATION_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        _emit(buf.getvalue(), args.out, "validate_analysis.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdfind", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
    common.add_argument("--replicates", type=int, metavar="N")
    common.add_argument("--out", metavar="DIR", help="write CSV into DIR instead of stdout")
    common.add_argument("--scheme", choices=("basic", "advanced"))
    common.add_argument("--desk", action="store_true", help="start from the 500 m / 625-detector geometry")
    common.add_argument("--workers", type=int, default=1, help="parallel processes for replicates")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="replicate runs of one configuration")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="sweep one parameter")
    p.add_argument("--param", required=True, choices=sorted(["p_thre", "k", "f", "omega", "q", "C"]))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fp-experiment", parents=[common], help="runs with the lost tag absent")
    p.set_defaults(func=cmd_fp)

    p = sub.add_parser("validate-analysis", parents=[common], help="closed forms against their oracles")
    p.add_argument("--trials", type=int, default=200_000, help="Monte-Carlo trials per row")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"crowdfind: invalid configuration: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
