# mtforge/config.py
"""
Run configuration: bundled defaults, then the user file (~/.mtforge/config.json)
or an explicit --config file, then command-line flags. Every command writes the
resolved result next to its outputs as config.snapshot.json.
"""

import copy
import json
from pathlib import Path
from typing import Any, Dict, Optional

from mtforge.errors import ConfigError
from mtforge.utils.config_loader import load_bundled_json
from mtforge.utils.jsonl import write_json

SNAPSHOT_NAME = "config.snapshot.json"
BLOCKS = ("tokstats", "clean", "pfms", "sft", "eval")


def get_config_path() -> Path:
    """Get the path to the user config file."""
    return Path.home() / ".mtforge" / "config.json"


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _read(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def load_config(path: Optional[Path] = None) -> Dict[str, Any]:
    """Defaults merged with `path`, or with the user file when no path is given."""
    try:
        config = load_bundled_json("defaults.json")
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"bundled defaults are unreadable: {e}") from e
    source = Path(path) if path is not None else get_config_path()
    if path is not None or source.exists():
        config = deep_merge(config, _read(source))
    return config


class RunConfig:
    """Resolved configuration for one invocation."""

    def __init__(self, data: Dict[str, Any]):
        self.data = data
        try:
            self.data["seed"] = int(self.data.get("seed", 0))
            self.data["workers"] = int(self.data.get("workers", 1))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"seed and workers must be integers: {e}") from e
        if self.data["seed"] < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.data["workers"] < 1:
            raise ConfigError("workers must be at least 1")

    @classmethod
    def resolve(cls, path: Optional[Path] = None, seed: Optional[int] = None, workers: Optional[int] = None) -> "RunConfig":
        data = load_config(path)
        if seed is not None:
            data["seed"] = seed
        if workers is not None:
            data["workers"] = workers
        return cls(data)

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def workers(self) -> int:
        return self.data["workers"]

    def block(self, name: str) -> Dict[str, Any]:
        return self.data.setdefault(name, {})

    def override(self, name: str, **values) -> Dict[str, Any]:
        """Apply flags that were given (not None) to a block and return it."""
        block = self.block(name)
        block.update({k: v for k, v in values.items() if v is not None})
        return block

    def snapshot(self, out_dir, command: str, inputs: Optional[Dict[str, Any]] = None) -> Path:
        snap = copy.deepcopy(self.data)
        snap["command"] = command
        if inputs:
            snap["inputs"] = {k: v for k, v in inputs.items() if v is not None}
        path = Path(out_dir) / SNAPSHOT_NAME
        write_json(path, snap)
        return path
