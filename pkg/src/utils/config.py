import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.models.schemas import ExperimentConfig
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parent.parent.parent

load_dotenv(ROOT / ".env")


class Settings(BaseSettings):
    """Process settings from ALPHAMOD_* environment variables (and .env)."""

    model_config = SettingsConfigDict(
        env_prefix="ALPHAMOD_", env_file=ROOT / ".env", extra="ignore"
    )

    log_level: str = "INFO"
    output_dir: Path = Path("results")
    config_dir: Path = ROOT / "config"


class LibraryDefaults(BaseModel):
    """Library-wide numerical defaults from config/settings.yaml."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fit_tolerance: float = Field(default=0.1, gt=0.0)
    drift_tolerance: float = Field(default=0.1, gt=0.0)
    divergence_tolerance: float = Field(default=0.05, gt=0.0)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"{path}: invalid YAML{where}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping of sections")
    return data


def _describe(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}"
        for error in exc.errors()
    )


def load_defaults(path: Optional[Path] = None) -> LibraryDefaults:
    target = Path(path) if path is not None else get_settings().config_dir / "settings.yaml"
    if not target.exists():
        return LibraryDefaults()
    try:
        return LibraryDefaults(**_read_yaml(target).get("defaults", {}))
    except ValidationError as exc:
        raise ConfigError(f"{target}: {_describe(exc)}") from exc


def parse_experiment_config(data: Dict[str, Any], source: str = "<memory>") -> ExperimentConfig:
    """Validate one experiment mapping; every failure names its dotted field."""
    for name, section in data.items():
        if section is not None and not isinstance(section, dict):
            raise ConfigError(f"{source}: section '{name}' must be a mapping")
        if isinstance(section, dict):
            nested = [key for key, value in section.items() if isinstance(value, dict)]
            if nested:
                raise ConfigError(f"{source}: {name}.{nested[0]} nests deeper than one level")
    try:
        return ExperimentConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_describe(exc)}") from exc


def load_experiment_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    config = parse_experiment_config(_read_yaml(path), str(path))
    logger.debug("loaded experiment %s from %s", config.experiment.id, path)
    return config
