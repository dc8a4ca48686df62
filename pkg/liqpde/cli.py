# Copyright (c) 2026 liqpde developers
# MIT License

"""
liqpde run CONFIG [EXPERIMENT ...]
liqpde <experiment> CONFIG
liqpde runs [--experiment NAME]
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from liqpde import controller, settings
from liqpde.data_models import EXPERIMENT_NAMES
from liqpde.exceptions import LiquidationError

logger = logging.getLogger("liqpde")


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", type=Path, help="TOML experiment configuration")
    parser.add_argument("--seed", type=int, help="Override simulation.seed")
    parser.add_argument("--paths", type=int, help="Override simulation.n_paths")
    parser.add_argument("--grid-nt", type=int, help="Override grid.n_time")
    parser.add_argument("--grid-ny", type=int, help="Override grid.n_space")
    parser.add_argument("--out-dir", type=Path, help="Artifact root directory")
    parser.add_argument("--registry", metavar="URL", help="Record runs in this database")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liqpde",
        description="Singular terminal value HJB solver and Monte-Carlo verification "
        "for portfolio liquidation with a dark pool",
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Root log level")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run several experiments from one configuration")
    _add_overrides(run)
    run.add_argument(
        "experiments",
        nargs="*",
        metavar="EXPERIMENT",
        help=f"One of {', '.join(EXPERIMENT_NAMES)}; defaults to the configured list",
    )

    for name in EXPERIMENT_NAMES:
        single = commands.add_parser(name, help=f"Run the {name} experiment")
        _add_overrides(single)

    runs = commands.add_parser("runs", help="List recorded runs")
    runs.add_argument("--registry", metavar="URL", default=settings.REGISTRY_URL)
    runs.add_argument("--experiment", choices=EXPERIMENT_NAMES)
    return parser


def _list_runs(url: str, experiment: Optional[str]) -> int:
    from liqpde.registry import list_runs, session_scope

    with session_scope(url) as session:
        for run in list_runs(session, experiment):
            status = "pass" if run.passed else "FAIL"
            print(  # noqa: T201
                f"{run.id}\t{run.created_at:%Y-%m-%d %H:%M:%S}\t{run.experiment}\t{status}"
                f"\t{run.config_hash[:12]}\tseed={run.seed}\t{run.artifact_dir}"
            )
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=str(args.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "runs":
            return _list_runs(args.registry, args.experiment)
        names = args.experiments if args.command == "run" else [args.command]
        return controller.run(
            args.config,
            names,
            registry_url=args.registry,
            seed=args.seed,
            paths=args.paths,
            grid_nt=args.grid_nt,
            grid_ny=args.grid_ny,
            out_dir=args.out_dir,
        )
    except LiquidationError as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
