"""Flat ``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored. Lists are comma separated;
``none`` clears an optional field. Keys must match a field of the target
config class exactly; anything else is a hard error.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

from .errors import ConfigError

__all__ = ["read_config", "load_config", "config_echo", "bundled_config"]

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def read_config(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _convert(key: str, value: str, annotation: str):
    ann = annotation.replace(" ", "")
    optional = ann.startswith("Optional[")
    if optional:
        if value.lower() == "none":
            return None
        ann = ann[len("Optional["):-1]
    try:
        if ann == "int":
            return int(value)
        if ann == "float":
            return float(value)
        if ann == "bool":
            v = value.lower()
            if v in _TRUE:
                return True
            if v in _FALSE:
                return False
            raise ValueError(value)
        if ann == "str":
            return value
        if ann == "tuple":
            return tuple(_scalar(s.strip()) for s in value.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for config key {key!r}: {value!r}") from exc
    raise ConfigError(f"config key {key!r} has unsupported type {annotation}")


def load_config(path, cls, overrides: dict | None = None):
    """Build ``cls`` from a config file; unknown keys raise ConfigError."""
    raw = read_config(path)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _convert(key, value, str(fields[key].type))
    kwargs.update(overrides or {})
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_echo(config) -> dict:
    d = dataclasses.asdict(config)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``fig4``, ``fig5``, ``fig7``)."""
    base = Path(__file__).parent / "configs"
    p = base / (name if name.endswith(".cfg") else name + ".cfg")
    if not p.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return p
