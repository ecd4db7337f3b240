"""Loading of TOML experiment files layered over the packaged defaults."""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


def _read_defaults() -> dict[str, Any]:
    text = resources.files(__package__).joinpath("defaults.toml").read_text(encoding="utf-8")
    return tomllib.loads(text)


DEFAULTS = _read_defaults()


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def load(path=None) -> dict[str, Any]:
    """Defaults, overlaid with the file at ``path`` when given."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    text = Path(path).read_text(encoding="utf-8")  # OSError propagates as an I/O failure
    try:
        user = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(user) - {"sim", "sweep", "density"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    return merge(DEFAULTS, user)
