#!/usr/bin/env python3
"""
Sparse Sense command line.

  gen        draw a matrix from the configured ensemble
  sparsify   mask + apply at every configured density
  trials     recovery sweep (trials.csv + summary.csv)
  threshold  R_t estimates (thresholds.csv + traces/)
  report     plot-data series from a finished run

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError
from rich.console import Console

from config import Config
from src.bench import print_thresholds, report, run_sweep, run_threshold
from src.errors import ConfigError, SparseSenseError
from src.experiment_loader import ExperimentLoader
from src.matgen import generate
from src.seeding import Seed
from src.sparsifier import dump_sparsified, relative_density, sparsify

log = logging.getLogger("sparse_sense")
console = Console()

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _fixed_seed(master: int) -> Seed:
    # Same seed a fixed-mode run uses for its single matrix.
    return Seed(master=master).derive("matrix", 0)


def cmd_gen(args, loader: ExperimentLoader) -> int:
    cfg = loader.with_overrides(seed=args.seed, output=args.out)
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    for ensemble in cfg.shapes():
        matrix = generate(ensemble, _fixed_seed(cfg.seed).derive("matrix"))
        path = cfg.run_dir / f"{ensemble.label}_{ensemble.n}x{ensemble.N}.txt"
        np.savetxt(path, matrix, fmt="%.17g")
        console.print(f"[green]✓[/green] {ensemble.label} {ensemble.n}x{ensemble.N} -> {path}")
    return EXIT_OK


def cmd_sparsify(args, loader: ExperimentLoader) -> int:
    cfg = loader.with_overrides(seed=args.seed, output=args.out)
    seed = _fixed_seed(cfg.seed)
    if args.matrix:
        bases = [(Path(args.matrix).stem, np.loadtxt(args.matrix, ndmin=2))]
    else:
        bases = [(f"{e.label}_{e.n}x{e.N}", generate(e, seed.derive("matrix"))) for e in cfg.shapes()]

    for name, base in bases:
        for density in cfg.densities:
            sm = sparsify(base, seed.derive("mask"), s=density, base=name)
            path = dump_sparsified(sm, cfg.run_dir / f"{name}_d{density:g}.txt")
            console.print(
                f"[green]✓[/green] {name} s={density:g} t={sm.mask.t} "
                f"relative density {relative_density(sm, base):.4f} -> {path}"
            )
    return EXIT_OK


def cmd_trials(args, loader: ExperimentLoader) -> int:
    cfg = loader.with_overrides(seed=args.seed, output=args.out)
    result = run_sweep(cfg, workers=args.workers, progress=not args.quiet)
    if not args.quiet:
        result.tracker.print_summary()
    console.print(f"[green]✓[/green] {result.rows:,} trial rows -> {result.trials_csv}")
    return EXIT_OK


def cmd_threshold(args, loader: ExperimentLoader) -> int:
    cfg = loader.with_overrides(seed=args.seed, output=args.out)
    runs = run_threshold(cfg, workers=args.workers, progress=not args.quiet)
    if not args.quiet:
        print_thresholds(runs)
    console.print(f"[green]✓[/green] thresholds -> {cfg.run_dir / 'thresholds.csv'}")
    return EXIT_OK


def cmd_report(args, loader) -> int:
    if args.input:
        input_dir = Path(args.input)
    elif loader is not None:
        input_dir = loader.with_overrides(seed=args.seed, output=args.out).run_dir
    else:
        raise ConfigError("report needs --input DIR or --config")
    out_dir = Path(args.out) if args.input and args.out else None
    for path in report(input_dir, out_dir):
        console.print(f"[green]✓[/green] {path}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "sparsify": cmd_sparsify,
    "trials": cmd_trials,
    "threshold": cmd_threshold,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-sense", description=__doc__.split("\n\n")[0].strip())
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"experiment JSON path or template name ({', '.join(Config.list_available_templates())})")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--workers", type=int, default=Config.get_workers(), help="worker processes (default: SPARSE_SENSE_WORKERS or 1)")
    common.add_argument("--quiet", action="store_true", help="warnings only, no progress or tables")

    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen", "sparsify", "trials", "threshold"):
        sub.add_parser(name, parents=[common])
    sub.choices["sparsify"].add_argument("--matrix", help="sparsify this whitespace-separated matrix instead of drawing one")
    report_parser = sub.add_parser("report", parents=[common])
    report_parser.add_argument("--input", help="run directory holding summary.csv / thresholds.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else Config.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        loader = None
        if args.config:
            loader = ExperimentLoader(args.config)
            if not args.quiet:
                loader.print_summary()
        elif args.command != "report":
            raise ConfigError(f"{args.command} needs --config")
        return COMMANDS[args.command](args, loader)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (SparseSenseError, ValidationError, OSError) as exc:
        log.exception("run failed: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
