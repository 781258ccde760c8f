"""Runtime settings: built-in defaults, then a JSON file, then GEOASK_* env vars."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Optional

from .errors import BadConfig

ENV_PREFIX = "GEOASK_"

MODE_SCRIPTED = "scripted"
MODE_LIVE = "live"
MODES = (MODE_SCRIPTED, MODE_LIVE)

FIXTURES = ("worked", "portal")
EMBEDDINGS = ("hash", "recorded")


@dataclass(frozen=True)
class Settings:
    """Everything the server and CLI need to assemble an engine.

    String fields stay strings on purpose: the same value may arrive from
    a JSON file or an environment variable, and only ``port`` and
    ``llm_timeout`` carry numeric meaning.
    """

    host: str = "127.0.0.1"
    port: int = 8765
    data_dir: str = ""
    mode: str = MODE_SCRIPTED
    transcript_path: str = ""
    fixture: str = "worked"
    llm_base_url: str = ""
    llm_model: str = "gpt-4o"
    llm_api_key: str = ""
    llm_timeout: float = 60.0
    geocoder: str = "fixtures"
    embedding: str = "hash"


def _as_int(name: str, raw: object) -> int:
    try:
        return int(str(raw))
    except (TypeError, ValueError):
        raise BadConfig(f"{name} must be an integer, got {raw!r}")


def _as_float(name: str, raw: object) -> float:
    try:
        return float(str(raw))
    except (TypeError, ValueError):
        raise BadConfig(f"{name} must be a number, got {raw!r}")


def settings_from(values: Mapping[str, object]) -> Settings:
    """Build validated settings from a plain mapping."""
    known = [f.name for f in fields(Settings)]
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise BadConfig(f"unknown settings: {', '.join(unknown)}")
    coerced = {}
    for name in known:
        if name not in values:
            continue
        raw = values[name]
        if name == "port":
            coerced[name] = _as_int(name, raw)
        elif name == "llm_timeout":
            coerced[name] = _as_float(name, raw)
        elif isinstance(raw, str):
            coerced[name] = raw
        else:
            raise BadConfig(f"{name} must be a string, got {type(raw).__name__}")
    settings = Settings(**coerced)
    _check(settings)
    return settings


def _check(settings: Settings) -> None:
    if not 1 <= settings.port <= 65535:
        raise BadConfig(f"port out of range: {settings.port}")
    if settings.mode not in MODES:
        raise BadConfig(f"mode must be one of {MODES}, got {settings.mode!r}")
    if settings.fixture not in FIXTURES:
        raise BadConfig(f"fixture must be one of {FIXTURES}, got {settings.fixture!r}")
    if settings.embedding not in EMBEDDINGS:
        raise BadConfig(
            f"embedding must be one of {EMBEDDINGS}, got {settings.embedding!r}"
        )
    if settings.mode == MODE_LIVE and not settings.llm_base_url:
        raise BadConfig("live mode needs llm_base_url")
    if settings.llm_timeout <= 0:
        raise BadConfig(f"llm_timeout must be positive, got {settings.llm_timeout}")


def load_settings(
    path: Optional[str] = None, env: Optional[Mapping[str, str]] = None
) -> Settings:
    """Defaults, overlaid by the JSON config file, overlaid by GEOASK_* vars.

    The file comes from ``path`` or the GEOASK_CONFIG variable; either may
    be absent. Environment values always win over file values.
    """
    env = os.environ if env is None else env
    values: dict = {}
    config_path = path or env.get(ENV_PREFIX + "CONFIG", "")
    if config_path:
        try:
            raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise BadConfig(f"config file not found: {config_path}")
        except json.JSONDecodeError as exc:
            raise BadConfig(f"config file is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise BadConfig("config file must hold a JSON object")
        values.update(raw)
    for field in fields(Settings):
        key = ENV_PREFIX + field.name.upper()
        if key in env:
            values[field.name] = env[key]
    return settings_from(values)
