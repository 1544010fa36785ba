"""
Run one experiment from its YAML config and write report.json plus tables/*.csv

Usage:
    python scripts/run_experiment.py --config config/experiments/frame-tightness.yaml

    # override seed and output directory:
    python scripts/run_experiment.py --config config/experiments/ap-diagnostics.yaml --seed 7 --out results/ap

    # only check the config:
    python scripts/run_experiment.py --config config/experiments/reducing.yaml --validate-only

Exit codes: 0 checks passed, 1 checks failed, 2 config or validation error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.services.runner import ExperimentRunner
from src.utils.config import get_settings, load_experiment_config
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    parser = argparse.ArgumentParser(description="Run one alpha-modulation experiment")
    parser.add_argument("--config", required=True, help="Path to the experiment YAML")
    parser.add_argument("--out", default=None, help="Output directory (default: <output_dir>/<experiment id>)")
    parser.add_argument("--seed", type=int, default=None, help="Override experiment.seed")
    parser.add_argument("--experiment", default=None, help="Override experiment.id")
    parser.add_argument("--validate-only", action="store_true", help="Validate the config and exit")
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(name)s - %(levelname)s - %(message)s",
    )

    try:
        config = load_experiment_config(Path(args.config))
    except ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_CONFIG
    if args.experiment:
        config = config.model_copy(
            update={"experiment": config.experiment.model_copy(update={"id": args.experiment})}
        )

    runner = ExperimentRunner(settings.output_dir)
    diagnostics = runner.validate(config)
    for diagnostic in diagnostics:
        if diagnostic.severity == "error":
            logger.error("%s: %s", diagnostic.location, diagnostic.message)
        else:
            logger.info("%s: %s", diagnostic.location, diagnostic.message)
    if any(d.severity == "error" for d in diagnostics):
        return EXIT_CONFIG
    if args.validate_only:
        logger.info("config %s is valid", args.config)
        return EXIT_PASSED

    logger.info("=" * 60)
    logger.info("Experiment: %s", config.experiment.id)
    logger.info("Config: %s", args.config)
    logger.info("=" * 60)
    report = runner.run(config, Path(args.out) if args.out else None, args.seed)
    return EXIT_PASSED if report.passed else EXIT_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
