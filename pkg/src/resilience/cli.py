"""Command-line entry point: ``resilience <subcommand> --config PATH``.

Flags override the config file, which overrides built-in defaults.
Exit codes: 0 success, 1 unexpected error, 2 config error, 3 data error,
4 convergence failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ResilienceError
from .pipeline import STAGES, Pipeline

log = logging.getLogger("resilience")

SUBCOMMANDS = {stage: (stage,) for stage in STAGES}
SUBCOMMANDS["run-all"] = STAGES

HELP = {
    "ingest": "parse inputs, write rejects reports and the aligned 15-minute grid",
    "events": "extract significant events and write the event table",
    "correlate": "Pearson correlation of weather features and metrics",
    "fit": "split the event table and fit single and joint models on the training rows",
    "compare": "stepping-stone evidence and Bayes factors on the training rows",
    "evaluate": "validation and test RMSE/MAE of the fitted models",
    "contour": "per-precipitation-regime surfaces of the multiplicative model",
    "run-all": "every stage in order",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resilience", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="top-level seed (overrides the config)")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--force", action="store_true", help="fit even when fewer than 10 rows are available")
        p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        config = load_config(args.config, overrides)
        if args.out is not None:
            config.paths.out_dir = str(args.out.resolve())
        Pipeline(config, force=args.force).run(SUBCOMMANDS[args.command])
    except ResilienceError as exc:
        print(f"resilience: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        log.exception("unexpected failure")
        print(f"resilience: unexpected error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
