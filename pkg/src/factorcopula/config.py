"""Configuration management.

Loads runtime configuration from environment variables with validation and
defaults. Per-run settings (data, columns, model) live in RunConfig files,
see schemas.RunConfig.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import ConfigError

DEFAULT_NQ = 25
DEFAULT_MAX_ITER = 500
DEFAULT_CHUNK_ROWS = 4096
DEFAULT_WORKERS = 1
DEFAULT_LOG_LEVEL = "INFO"


def _env_int(name: str, default: int) -> int:
    """Parse an environment variable as a positive integer.

    Args:
        name: Environment variable name.
        default: Default value if variable is not set.

    Returns:
        The parsed integer value.

    Raises:
        ConfigError: If the value is not a valid integer or is <= 0.
    """
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"Invalid {name}={raw!r}, expected integer") from exc
    if value <= 0:
        raise ConfigError(f"Invalid {name}={raw!r}, expected > 0")
    return value


def _env_str(name: str, default: str) -> str:
    """Parse an environment variable as a string.

    Args:
        name: Environment variable name.
        default: Default value if variable is not set or empty.

    Returns:
        The trimmed string value or default.
    """
    value = os.getenv(name)
    return default if value is None or value.strip() == "" else value.strip()


def _env_optional_path(name: str) -> str | None:
    value = _env_str(name, "")
    return value or None


@dataclass(frozen=True)
class AppConfig:
    """Immutable runtime configuration.

    Attributes:
        nq: Gauss-Legendre nodes per latent dimension.
        max_iter: Iteration cap for the quasi-Newton optimizer.
        chunk_rows: Rows evaluated per likelihood block (bounds 2-factor memory).
        workers: Threads used for candidate fits and simulation replicates.
        log_level: Logging level name for the CLI.
        candidates_path: JSON file overriding the packaged candidate sets.
        presets_path: JSON file overriding the packaged simulation presets.
    """

    nq: int
    max_iter: int
    chunk_rows: int
    workers: int
    log_level: str
    candidates_path: str | None
    presets_path: str | None


def load_config() -> AppConfig:
    """Load configuration from environment variables.

    Returns:
        The loaded application configuration.

    Raises:
        ConfigError: If a variable holds an invalid value.
    """
    nq = _env_int("FC_NQ", DEFAULT_NQ)
    if nq < 2:
        raise ConfigError(f"Invalid FC_NQ={nq!r}, expected >= 2")
    log_level = _env_str("FC_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()
    if log_level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
        raise ConfigError(f"Invalid FC_LOG_LEVEL={log_level!r}")
    return AppConfig(
        nq=nq,
        max_iter=_env_int("FC_MAX_ITER", DEFAULT_MAX_ITER),
        chunk_rows=_env_int("FC_CHUNK_ROWS", DEFAULT_CHUNK_ROWS),
        workers=_env_int("FC_WORKERS", DEFAULT_WORKERS),
        log_level=log_level,
        candidates_path=_env_optional_path("FC_CANDIDATES_JSON"),
        presets_path=_env_optional_path("FC_PRESETS_JSON"),
    )
