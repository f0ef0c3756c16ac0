"""
Configuration
=============

Two layers of configuration are used:

* process settings (thread count, chunking, log level, preset file) come
  from the environment through :class:`Settings`, prefixed with ``AHE_``
  and optionally read from a ``.env`` file;
* reconstruction parameters are flat ``key: value`` mappings assembled
  from a named preset in ``config/config.yaml``, an optional user config
  file of ``key = value`` lines and the command-line flags, in that order
  of precedence.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import yaml
from dotenv import dotenv_values
from loguru import logger
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ImageFormatError, InvalidInputError

DEFAULT_PRESETS_PATH = Path(__file__).resolve().parent.parent / "config" / "config.yaml"


class Settings(BaseSettings):
    """Process-wide knobs; none of them changes numerical results."""

    model_config = SettingsConfigDict(env_prefix="AHE_", env_file=".env", extra="ignore")

    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    # Frequency groups handed to one worker task. Fixed, so that the
    # partition of the work never depends on the thread count.
    chunk_groups: int = Field(default=2048, ge=1)
    log_level: str = "INFO"
    presets_path: Path = DEFAULT_PRESETS_PATH


settings = Settings()


def load_preset_file(path: Optional[Path] = None) -> Dict[str, Any]:
    """Read the YAML preset file and return its raw mapping."""
    path = Path(path or settings.presets_path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as e:
        raise ImageFormatError(f"cannot read preset file {path}: {e}") from e
    if not isinstance(data, dict):
        raise InvalidInputError(f"preset file {path} must contain a mapping")
    return data


def preset_names(path: Optional[Path] = None) -> list[str]:
    return sorted(load_preset_file(path).get("presets", {}))


def load_preset(name: Optional[str], path: Optional[Path] = None) -> Dict[str, Any]:
    """Return ``defaults`` overlaid with the named preset (or just the defaults)."""
    data = load_preset_file(path)
    merged: Dict[str, Any] = dict(data.get("defaults", {}))
    if name is None:
        return merged
    presets = data.get("presets", {})
    if name not in presets:
        raise InvalidInputError(f"unknown preset {name!r}; available: {', '.join(sorted(presets))}")
    merged.update(presets[name] or {})
    logger.debug("loaded preset {} with {} keys", name, len(merged))
    return merged


def load_config_file(path: Path) -> Dict[str, str]:
    """Parse a ``key = value`` file. Values stay strings; the parameter models coerce them."""
    if not Path(path).is_file():
        raise ImageFormatError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {k.strip().lower(): v for k, v in values.items() if v is not None}


def merge_parameters(*layers: Mapping[str, Any]) -> Dict[str, Any]:
    """Merge parameter layers left to right; ``None`` never overrides a value."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        for key, value in layer.items():
            if value is not None:
                merged[key] = value
    return merged
