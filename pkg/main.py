"""
varsep-mor - Reduced-Order Solvers for 2D Advection-Diffusion

Command-line entry point for the separated-variable solvers (HiMod, PGD,
parametric PGD, HiPOD) and the FE reference, plus the studies that compare
them.

Usage:
    python main.py fig1 [--config configs/two_source.ini] [--out results/fig1] [--full-reference]
    python main.py table1 | fig2 | fig3 [--config ...] [--out ...] [--seed N]
    python main.py solve-fe | solve-himod | solve-pgd --config problem.ini [--mu 2.5]
    python main.py solve-pgd-param | hipod-offline | hipod-online --config problem.ini [--mu 2.5]

Exit codes:
    0  success
    1  solver failure (non-convergence, singular system, out-of-range mu, ...)
    2  invalid configuration or arguments

Environment Variables (set in .env file):
    VARSEP_OUTPUT_DIR: Output directory when --out is omitted (default: results/<command>)
    VARSEP_LOG_LEVEL: Logging level (default: INFO)
    VARSEP_SEED: Seed for randomized mu draws when --seed is omitted (default: 20190001)
    VARSEP_DEBUG_DUMP: When 'true', stages write debug_<stage>.txt next to their results

Version: 1.0.0
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from errors import ConfigError, VarsepError
from experiments import REQUIRED_SOLVERS, load_experiment_config, run_command

# Load environment variables from .env file
load_dotenv()

LOG_LEVEL = os.getenv("VARSEP_LOG_LEVEL", "INFO").upper()

# Configure logging
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent / "configs"

DEFAULT_CONFIGS = {
    "fig1": "two_source.ini",
    "table1": "two_source.ini",
    "fig2": "inlet_channel.ini",
    "fig3": "inlet_channel.ini",
}

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_CONFIG_ERROR = 2


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns the exit code."""

    def error(self, message: str):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="varsep-mor", description="Separated-variable reduced-order solvers")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    for command in REQUIRED_SOLVERS:
        cmd = sub.add_parser(command)
        cmd.add_argument(
            "--config",
            required=command not in DEFAULT_CONFIGS,
            help="problem INI with optional [solver] section",
        )
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument("--seed", type=int, help="seed for randomized mu draws")
        cmd.add_argument("--mu", type=float, help="diffusivity to solve or evaluate at")
        cmd.add_argument(
            "--full-reference", action="store_true", help="use the full-resolution FE reference grid"
        )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = args.config or str(CONFIG_DIR / DEFAULT_CONFIGS[args.command])
        out = args.out or os.getenv("VARSEP_OUTPUT_DIR") or str(Path("results") / args.command)
        cfg = load_experiment_config(
            args.command,
            config,
            output_dir=out,
            seed=args.seed,
            full_reference=args.full_reference,
            mu=args.mu,
        )
        logger.info(f"Running {args.command} with {config} into {out}")
        result = run_command(cfg, args.mu)
    except ConfigError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_CONFIG_ERROR
    except VarsepError as exc:
        logger.error(f"Solver failure: {exc}", exc_info=True)
        return EXIT_SOLVER_FAILURE

    for key, value in sorted(result.metrics.items()):
        logger.info(f"{key} = {value:.6g}")
    logger.info(f"Manifest written to {result.manifest}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
