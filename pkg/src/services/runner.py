"""
Experiment runner: validates a config, dispatches to its harness and writes
report.json plus one CSV per result table.

Usage:
    runner = ExperimentRunner()
    for diagnostic in runner.validate(config):
        ...
    report = runner.run(config, out_dir=Path("results/frame"))
"""

import json
import logging
import math
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.analysis import multiplier, signals
from src.analysis import weights as weight_models
from src.analysis.bapu import PROFILES, BapuSystem
from src.analysis.covering import band_side, is_commensurate
from src.analysis.grid import Grid, band_fits_guard
from src.models.schemas import Diagnostic, ExperimentConfig, Report
from src.services.experiments import HARNESSES, Outcome, Setup
from src.utils.errors import AlphaModError, ConfigError

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """Numpy scalars and containers to JSON-ready Python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


class ExperimentRunner:
    """Runs one configured experiment; file output is optional."""

    def __init__(self, output_root: Optional[Path] = None):
        self.output_root = Path(output_root) if output_root is not None else None

    # ============ VALIDATION ============

    def validate(self, config: ExperimentConfig) -> List[Diagnostic]:
        """
        Cross-field checks that need no computation.

        Errors: unknown registry ids, bands outside the guard band, reducing
        quadrature coarser than the grid. Info: cube lattices that do not
        repeat with the box period.
        """
        out: List[Diagnostic] = []

        def error(location: str, message: str) -> None:
            out.append(Diagnostic(severity="error", location=location, message=message))

        if config.experiment.id not in HARNESSES:
            known = ", ".join(sorted(HARNESSES))
            error("experiment.id", f"unknown experiment '{config.experiment.id}' (known: {known})")
        if config.corpus.signal not in signals.available():
            error("corpus.signal", f"unknown signal '{config.corpus.signal}'")
        if config.symbol.id not in multiplier.available():
            error("symbol.id", f"unknown symbol '{config.symbol.id}'")
        profile = config.options.get("profile", "bump")
        if profile not in PROFILES:
            error("options.profile", f"unknown window profile '{profile}'")
            return out
        try:
            weight_models.from_spec(config.weight)
        except AlphaModError as exc:
            error("weight", str(exc))

        params = config.covering
        grid = Grid.from_params(config.grid, params.a)
        system = BapuSystem(params, profile)
        outside = [
            k
            for k in system.keys
            if not band_fits_guard(grid, system.centers[system.position(k)], system.support_radius(k))
        ]
        if outside:
            error(
                "grid",
                f"band exceeds guard band: k={outside[0]} reaches past |xi| <= {grid.guard:.4g} "
                f"({len(outside)} bands); raise grid.M or lower covering.Kmax",
            )

        edge = (params.Kmax,) + (0,) * (params.n - 1)
        side = band_side(params, edge, 2.0 * grid.T)
        if side < 2.0 * grid.h:
            error("grid.M", f"quadrature under-resolved: smallest cube side {side:.4g} < 2h = {2.0 * grid.h:.4g}")

        skewed = [k for k in system.keys if not is_commensurate(params, k, grid.T)]
        if skewed:
            out.append(
                Diagnostic(
                    severity="info",
                    location="grid.T",
                    message=f"{len(skewed)} cube lattices are not commensurate with the box period "
                    f"(first k={skewed[0]}); their side is shrunk so whole cubes tile the box",
                )
            )
        return out

    # ============ RUN ============

    def run(
        self,
        config: ExperimentConfig,
        out_dir: Optional[Path] = None,
        seed: Optional[int] = None,
    ) -> Report:
        """
        Run the harness of config.experiment.id.

        Args:
            config: validated experiment config
            out_dir: where report.json and tables/*.csv go; defaults to
                output_root/<experiment id>, nothing is written when both are None
            seed: overrides config.experiment.seed

        Returns:
            Report; a library error inside the harness yields a failed report
        """
        experiment = config.experiment.id
        harness = HARNESSES.get(experiment)
        if harness is None:
            raise ConfigError(f"unknown experiment '{experiment}'")
        run_seed = config.experiment.seed if seed is None else int(seed)

        logger.info("running %s (seed=%d)", experiment, run_seed)
        started = time.perf_counter()
        try:
            outcome = harness(Setup(config, run_seed))
        except AlphaModError as exc:
            logger.error("%s failed: %s", experiment, exc)
            outcome = Outcome(passed=False, messages=[f"{type(exc).__name__}: {exc}"])
        elapsed = time.perf_counter() - started

        report = Report(
            experiment=experiment,
            seed=run_seed,
            inputs=_plain(config.model_dump()),
            scalars=_plain(outcome.scalars),
            tables=sorted(outcome.tables),
            passed=outcome.passed,
            messages=outcome.messages,
            runtime_seconds=elapsed,
        )
        logger.info(
            "%s %s in %.2fs", experiment, "passed" if report.passed else "FAILED", elapsed
        )
        for message in report.messages:
            logger.warning("  %s", message)

        if out_dir is None and self.output_root is not None:
            out_dir = self.output_root / experiment
        if out_dir is not None:
            self.write(report, outcome.tables, Path(out_dir))
        return report

    @staticmethod
    def write(report: Report, tables: Dict[str, pd.DataFrame], out_dir: Path) -> Path:
        """report.json (sorted keys, no timing) and tables/<name>.csv."""
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "report.json"
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(report.model_dump(), handle, sort_keys=True, indent=2)
            handle.write("\n")
        if tables:
            table_dir = out_dir / "tables"
            table_dir.mkdir(exist_ok=True)
            for name in sorted(tables):
                tables[name].to_csv(table_dir / f"{name}.csv", index=False, float_format="%.17g")
        logger.info("wrote %s (%d tables)", path, len(tables))
        return path
