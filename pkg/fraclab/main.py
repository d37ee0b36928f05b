import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence
from pydantic import ValidationError
from fraclab.core.config import get_settings
from fraclab.core.errors import DomainError, LabError
from fraclab.core.logging import setup_logging
from fraclab.schemas.experiment import PIPELINES, ExperimentConfig
from fraclab.services.experiment import ExperimentService
from fraclab.services.report import ReportService
from fraclab.utils.config_file import load_config_file

settings = get_settings()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description="Solvability laboratory for the fractional semilinear heat equation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*PIPELINES, "report"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--out", type=Path, default=None, help="artifact directory")
        if name == "report":
            continue
        cmd.add_argument("--config", type=Path, default=None, help="flat key = value experiment file")
        cmd.add_argument("--seed", type=int, default=None, help="seed of the sampling diagnostics (u64)")
        cmd.add_argument("--workers", type=int, default=None, help="size of the worker pool")
    return parser


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Config file values overridden by the command-line flags."""
    data = load_config_file(args.config) if args.config else {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise DomainError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        data["seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    if args.out is not None:
        data["output_dir"] = str(args.out)
    data["pipeline"] = args.command
    return ExperimentConfig.model_validate(data)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one subcommand and return its exit status.

    Validation failures exit with 2, numerical failures with 3; the error
    message is printed unchanged.
    """
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        if args.command == "report":
            ReportService(args.out or settings.OUTPUT_DIR).emit_report()
            return EXIT_OK
        config = load_experiment(args)
        service = ExperimentService(config)
        service.run(args.command)
        ReportService(service.out).emit_report()
    except ValidationError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except DomainError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except LabError as exc:
        print(exc, file=sys.stderr)
        return EXIT_NUMERIC
    except Exception:
        logger.exception("Unhandled exception")
        return EXIT_UNEXPECTED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
