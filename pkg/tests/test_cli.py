import json
from pathlib import Path

import pytest
import yaml

from scripts.run_experiment import EXIT_CONFIG, EXIT_FAILED, EXIT_PASSED, main
from src.services.experiments import HARNESSES
from src.services.runner import ExperimentRunner
from src.utils.config import load_experiment_config, parse_experiment_config
from src.utils.errors import ConfigError

EXPERIMENTS = Path(__file__).resolve().parent.parent / "config" / "experiments"


@pytest.fixture
def runner():
    return ExperimentRunner()


@pytest.fixture
def covering_config():
    return load_experiment_config(EXPERIMENTS / "covering-check.yaml")


def write_config(path: Path, data: dict) -> Path:
    path.write_text(yaml.safe_dump(data))
    return path


class TestValidation:

    @pytest.mark.parametrize("path", sorted(EXPERIMENTS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_shipped_configs(self, runner, path):
        """Test every shipped config validates without errors and is named after its experiment"""
        config = load_experiment_config(path)
        assert path.stem.startswith(config.experiment.id)
        assert [d for d in runner.validate(config) if d.severity == "error"] == []

    def test_every_harness_has_a_config(self):
        ids = {load_experiment_config(p).experiment.id for p in EXPERIMENTS.glob("*.yaml")}
        assert ids == set(HARNESSES)

    def test_unknown_experiment(self, runner):
        config = parse_experiment_config({"experiment": {"id": "nope"}, "covering": {"alpha": 0.0}})
        errors = [d for d in runner.validate(config) if d.severity == "error"]
        assert [d.location for d in errors] == ["experiment.id"]

    def test_guard_band(self, runner):
        """Test bands past 0.9 xi_max are rejected"""
        config = parse_experiment_config(
            {"experiment": {"id": "bapu-check"}, "covering": {"alpha": 0.5, "Kmax": 8}, "grid": {"M": 1024}}
        )
        messages = [d.message for d in runner.validate(config) if d.severity == "error"]
        assert any("band exceeds guard band" in m for m in messages)

    def test_quadrature_resolution(self, runner):
        config = parse_experiment_config(
            {"experiment": {"id": "bapu-check"}, "covering": {"alpha": 0.0, "Kmax": 1}, "grid": {"M": 64}}
        )
        messages = [d.message for d in runner.validate(config) if d.severity == "error"]
        assert any("quadrature under-resolved" in m for m in messages)

    def test_incommensurate_lattice_is_info(self, runner):
        config = parse_experiment_config(
            {"experiment": {"id": "bapu-check"}, "covering": {"alpha": 0.5, "Kmax": 2}}
        )
        diagnostics = runner.validate(config)
        assert [d.severity for d in diagnostics] == ["info"]
        assert diagnostics[0].location == "grid.T"

    def test_unknown_registry_ids(self, runner):
        config = parse_experiment_config(
            {
                "experiment": {"id": "bessel"},
                "covering": {"alpha": 0.0, "Kmax": 2},
                "corpus": {"signal": "chirp"},
                "symbol": {"id": "heaviside"},
            }
        )
        locations = {d.location for d in runner.validate(config) if d.severity == "error"}
        assert locations == {"corpus.signal", "symbol.id"}


class TestRun:

    def test_writes_report_and_tables(self, runner, covering_config, tmp_path):
        report = runner.run(covering_config, tmp_path)
        assert report.passed
        assert report.scalars["n0"] == 3
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["experiment"] == "covering-check"
        assert "runtime_seconds" not in data
        assert (tmp_path / "tables" / "patches.csv").exists()

    def test_deterministic(self, runner, covering_config, tmp_path):
        """Test two runs with one seed write identical reports"""
        runner.run(covering_config, tmp_path / "a")
        runner.run(covering_config, tmp_path / "b")
        first = (tmp_path / "a" / "report.json").read_bytes()
        assert first == (tmp_path / "b" / "report.json").read_bytes()

    def test_seed_override(self, runner, covering_config):
        assert runner.run(covering_config, seed=9).seed == 9

    def test_nothing_written_without_target(self, covering_config, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        ExperimentRunner().run(covering_config)
        assert list(tmp_path.iterdir()) == []

    def test_output_root(self, covering_config, tmp_path):
        ExperimentRunner(tmp_path).run(covering_config)
        assert (tmp_path / "covering-check" / "report.json").exists()

    def test_unknown_experiment(self, runner):
        config = parse_experiment_config({"experiment": {"id": "nope"}, "covering": {"alpha": 0.0}})
        with pytest.raises(ConfigError):
            runner.run(config)


class TestCommandLine:

    def test_passed(self, tmp_path):
        code = main(["--config", str(EXPERIMENTS / "covering-check.yaml"), "--out", str(tmp_path)])
        assert code == EXIT_PASSED
        assert (tmp_path / "report.json").exists()

    def test_failed_check(self, tmp_path):
        """Test a tolerance the run cannot meet exits 1"""
        data = yaml.safe_load((EXPERIMENTS / "covering-check.yaml").read_text())
        data["tolerances"]["n0"] = 1
        path = write_config(tmp_path / "strict.yaml", data)
        assert main(["--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_FAILED

    def test_validate_only(self, tmp_path):
        config = str(EXPERIMENTS / "covering-check.yaml")
        code = main(["--config", config, "--validate-only", "--out", str(tmp_path)])
        assert code == EXIT_PASSED
        assert not (tmp_path / "report.json").exists()

    def test_invalid_config(self, tmp_path):
        data = {"experiment": {"id": "covering-check"}, "covering": {"alpha": 1.0}}
        path = write_config(tmp_path / "bad.yaml", data)
        assert main(["--config", str(path)]) == EXIT_CONFIG

    def test_validation_error(self, tmp_path):
        path = write_config(tmp_path / "bad.yaml", {"experiment": {"id": "nope"}, "covering": {"alpha": 0.0}})
        assert main(["--config", str(path)]) == EXIT_CONFIG

    def test_experiment_override(self, tmp_path):
        code = main(["--config", str(EXPERIMENTS / "covering-check.yaml"), "--experiment", "nope"])
        assert code == EXIT_CONFIG


@pytest.mark.slow
class TestShippedExperiments:

    @pytest.mark.parametrize("path", sorted(EXPERIMENTS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_config_passes(self, path, tmp_path):
        """Test every shipped config runs end to end and meets its own checks"""
        assert main(["--config", str(path), "--out", str(tmp_path)]) == EXIT_PASSED
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["passed"] is True
        assert data["messages"] == []
