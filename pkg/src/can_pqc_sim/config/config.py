"""
Centralized configuration utilities for can_pqc_sim.

This module resolves runtime configuration: the profile file, seed and log
level from environment variables (via dotenv), and run configs from YAML.

Environment variables supported:
- PQCAN_PROFILES (optional; profile file, takes precedence over the run config's `profiles`)
- PQCAN_SEED (optional; integer, overrides `campaign.master_seed`)
- PQCAN_LOG_LEVEL (optional; DEBUG, INFO, WARNING or ERROR, defaults to INFO)

Raises:
    ConfigurationError: if a configuration value is malformed.
"""

import logging
import os
from pathlib import Path
from typing import Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from can_pqc_sim.schemas.run_config import RunConfig


class ConfigurationError(Exception):
    """Raised when configuration values are missing or malformed."""
    pass


load_dotenv()

_LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}


def default_profiles_path() -> Path:
    """Profile file shipped with the package."""
    return Path(__file__).resolve().parent.parent / "data" / "profiles.yaml"


def get_profiles_path(configured: Optional[Union[str, Path]] = None) -> Path:
    """
    Return the profile file to load.

    Order: environment variable `PQCAN_PROFILES`, then `configured`, then
    the packaged profiles.

    Returns:
        Path: profile file path (existence is checked by the loader).
    """
    env = os.getenv("PQCAN_PROFILES")
    if env:
        return Path(env)
    if configured:
        return Path(configured)
    return default_profiles_path()


def get_seed_override() -> Optional[int]:
    """
    Return the master seed override from `PQCAN_SEED`, if set.

    Raises:
        ConfigurationError: if `PQCAN_SEED` is not an integer.
    """
    raw = os.getenv("PQCAN_SEED")
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw.strip(), 0)
    except ValueError:
        raise ConfigurationError(
            f"PQCAN_SEED must be an integer, got {raw!r}. "
            "Set it via environment variable, e.g.: export PQCAN_SEED=2025"
        ) from None


def get_log_level() -> int:
    """
    Return the log level named by `PQCAN_LOG_LEVEL`.

    Defaults to:
        logging.INFO

    Raises:
        ConfigurationError: if the name is not a known level.
    """
    raw = (os.getenv("PQCAN_LOG_LEVEL") or "INFO").strip().upper()
    try:
        return _LOG_LEVELS[raw]
    except KeyError:
        raise ConfigurationError(
            f"PQCAN_LOG_LEVEL must be one of {', '.join(_LOG_LEVELS)}, got {raw!r}"
        ) from None


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    """
    Parse a YAML run config and apply environment overrides.

    Raises:
        ConfigurationError: on YAML syntax errors, unknown keys or invalid values.
    """
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigurationError(f"{where}: YAML error: {getattr(e, 'problem', e)}") from e
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigurationError(f"{source}: run config must be a mapping of sections")

    try:
        config = RunConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise ConfigurationError(f"{source}: {field}: {first['msg']}") from e

    seed = get_seed_override()
    if seed is not None:
        config = config.model_copy(update={
            "campaign": config.campaign.model_copy(update={"master_seed": seed}),
        })
    return config


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    Load a run config file.

    Raises:
        ConfigurationError: if the file cannot be read or is invalid.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read run config {path}: {e.strerror or e}") from e
    return parse_run_config(text, source=str(path))
