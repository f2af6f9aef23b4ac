"""Command-line entry point: ``python -m app.cli {run,gen-blobs,report}``."""
import argparse
import json
import logging
import sys
from pathlib import Path

from app.core.config import settings
from app.core.errors import ConfigError, QkaError, exit_code_for
from app.core.utils import setup_logging
from app.data.datagen import BlobSpec, make_blobs, save_csv
from app.pipeline.runner import ExperimentRunner
from app.pipeline.schemas import ExperimentConfig, Stage
from app.services.artifact_service import ArtifactService

logger = logging.getLogger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(prog="qka-pipeline", description="SLR -> AALR -> QKA -> QSVC experiment runner")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", dest="output_dir")
    run.add_argument("--stage-through", dest="stage_through", choices=[s.value for s in Stage])

    gen = commands.add_parser("gen-blobs", help="write a synthetic blob dataset to CSV")
    gen.add_argument("--spec", required=True, type=Path)
    gen.add_argument("--out", required=True, type=Path)

    report = commands.add_parser("report", help="pretty-print a run report")
    report.add_argument("--in", dest="run_dir", required=True, type=Path)
    return parser


def cmd_run(args):
    config = ExperimentConfig.from_file(args.config, seed=args.seed, output_dir=args.output_dir,
                                        stage_through=args.stage_through)
    report = ExperimentRunner(config, ArtifactService(config.output_dir)).run()
    print(json.dumps({"status": report.status, "output_dir": config.output_dir, "artifacts": report.artifacts}, indent=2))


def cmd_gen_blobs(args):
    try:
        spec = BlobSpec.model_validate_json(args.spec.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"blob spec not found: {args.spec}")
    except ValueError as exc:
        raise ConfigError(f"invalid blob spec {args.spec}: {exc}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(make_blobs(spec), args.out)
    logger.info(f"Wrote {spec.n_classes * spec.samples_per_class} rows to {args.out}")


def cmd_report(args):
    print(json.dumps(ArtifactService.load_report(args.run_dir), indent=2))


COMMANDS = {"run": cmd_run, "gen-blobs": cmd_gen_blobs, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        COMMANDS[args.command](args)
    except QkaError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=settings.DEBUG)
        return e.exit_code
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly: {e}")
        return exit_code_for(e)
    return 0


if __name__ == "__main__":
    sys.exit(main())
