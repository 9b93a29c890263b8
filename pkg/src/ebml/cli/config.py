"""Experiment configuration: JSON documents checked against a schema."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

SCHEMA = json.loads(Path(__file__).with_name("schema.json").read_text())
TASKS = list(SCHEMA["properties"]["task"]["enum"])
DATASET_KINDS = list(SCHEMA["properties"]["data"]["properties"]["kind"]["enum"])


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate_config(cfg) -> dict:
    """Raise ConfigError naming the first offending field, else return cfg."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _json_path(e.absolute_path))
    data = cfg.get("data")
    if data is not None and ("kind" in data) == ("path" in data):
        raise ConfigError("exactly one of 'kind' or 'path' is required", "$.data")
    return cfg


def load_config(path, seed_override: int | None = None) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    cfg = validate_config(cfg)
    data = cfg.get("data")
    if data and "path" in data and not Path(data["path"]).is_absolute():
        data["path"] = str((p.parent / data["path"]).resolve())
    if "checkpoint" in cfg and not Path(cfg["checkpoint"]).is_absolute():
        cfg["checkpoint"] = str((p.parent / cfg["checkpoint"]).resolve())
    return cfg


def task_param(cfg: dict, key: str, default=None):
    return cfg.get("task_params", {}).get(key, default)
