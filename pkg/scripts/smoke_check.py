#!/usr/bin/env python
"""Baseline smoke checks: configs load, the partition sums to one, the frame is tight."""

import argparse
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from src.analysis.bapu import BapuSystem
from src.analysis.frame import FrameSystem, tight_frame_residual
from src.analysis.grid import Grid, commensurate_halfwidth
from src.analysis.signals import sample_closed_form
from src.models.schemas import CoveringParams
from src.services.runner import ExperimentRunner
from src.utils.config import get_settings, load_experiment_config


def check_configs(config_dir: Path) -> int:
    runner = ExperimentRunner()
    paths = sorted(config_dir.glob("*.yaml"))
    if not paths:
        raise RuntimeError(f"No experiment configs in {config_dir}")
    for path in paths:
        errors = [d for d in runner.validate(load_experiment_config(path)) if d.severity == "error"]
        if errors:
            raise RuntimeError(f"{path.name}: {errors[0].location}: {errors[0].message}")
    return len(paths)


def check_partition(alpha: float) -> float:
    system = BapuSystem(CoveringParams(alpha=alpha, Kmax=6))
    xi = np.linspace(-5.0, 5.0, 2001)
    error = float(np.max(np.abs(sum(system.psi(k, xi) for k in system.keys) - 1.0)))
    if error > 1e-12:
        raise RuntimeError(f"sum of psi_k deviates from 1 by {error:.3g}")
    return error


def check_frame() -> float:
    """Uniform covering on a box its cube lattices tile exactly."""
    params = CoveringParams(alpha=0.0, Kmax=8)
    grid = Grid(n=1, T=commensurate_halfwidth(params.a, 64), M=1024)
    frame = FrameSystem(BapuSystem(params), grid)
    f = sample_closed_form("gaussian", {"sigma": 1.0}, grid)
    residual, _ = tight_frame_residual(frame, f)
    if residual > 1e-8:
        raise RuntimeError(f"frame reconstruction residual {residual:.3g}")
    return residual


def main() -> int:
    parser = argparse.ArgumentParser(description="Run baseline smoke checks")
    parser.add_argument(
        "--config-dir",
        default=str(get_settings().config_dir / "experiments"),
        help="Directory of experiment YAML files",
    )
    parser.add_argument("--alpha", type=float, default=0.5, help="Modulation parameter of the partition check")
    parser.add_argument("--skip-configs", action="store_true", help="Skip config validation")
    parser.add_argument("--skip-frame", action="store_true", help="Skip the frame check")

    args = parser.parse_args()

    if not args.skip_configs:
        count = check_configs(Path(args.config_dir))
        print(f"Config check OK: {count} experiment configs validate")

    error = check_partition(args.alpha)
    print(f"Partition check OK: max error {error:.2e}")

    if not args.skip_frame:
        residual = check_frame()
        print(f"Frame check OK: residual {residual:.2e}")

    print("\nAll smoke checks passed.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
