"""Flat ``key = value`` config files with ``include other.cfg`` support.

Later keys override earlier ones; included files are read in place, relative
to the including file. Values are cast using the target dataclass's defaults.
"""
from __future__ import annotations

import dataclasses
import os


class ConfigError(ValueError):
    pass


def read_config(path, _seen=None):
    path = os.path.abspath(path)
    seen = set() if _seen is None else _seen
    if path in seen:
        raise ConfigError(f"include cycle at {path}")
    seen.add(path)
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("include "):
                inc = line[len("include "):].strip()
                out.update(read_config(os.path.join(os.path.dirname(path), inc), seen))
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


def _cast(name, default, value):
    if isinstance(value, str):
        text = value.strip()
    else:
        return value
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {text!r}") from None
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {text!r}") from None
    return text


def build(cls, mapping=None, **overrides):
    """Instantiate dataclass ``cls`` from string mapping plus typed overrides."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    values = {}
    for key, value in {**(mapping or {}), **overrides}.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r} for {cls.__name__}; "
                              f"valid keys: {', '.join(sorted(fields))}")
        f = fields[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        values[key] = _cast(key, default, value)
    return cls(**values)


def dump(obj):
    """Config text that :func:`read_config` + :func:`build` round-trips."""
    return "".join(f"{k} = {v}\n" for k, v in dataclasses.asdict(obj).items())
