"""Flat ``key=value`` text blocks for config dataclasses.

One pair per line, ``#`` starts a comment line. Tuples are comma-separated.
Floats are written with ``repr`` so a dump/parse round trip is exact.
"""
import dataclasses
import typing

from .errors import ConfigError


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_scalar(text, typ, key):
    try:
        if typ is bool:
            low = text.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        return text.strip()
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def parse_value(text, typ, key="value"):
    origin = typing.get_origin(typ)
    if origin in (tuple, list):
        (inner, *_rest) = typing.get_args(typ)
        parts = [p for p in text.split(",") if p.strip()]
        return tuple(_parse_scalar(p, inner, key) for p in parts)
    return _parse_scalar(text, typ, key)


def parse_pairs(text):
    """Parse a block into an ordered dict of raw strings. Duplicate keys are errors."""
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def dump(obj):
    lines = [f"{f.name}={format_value(getattr(obj, f.name))}" for f in dataclasses.fields(obj)]
    return "\n".join(lines) + "\n"


def field_types(cls):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def from_pairs(cls, pairs, strict=True):
    """Build ``cls`` from raw string pairs; unknown keys raise when ``strict``."""
    types = field_types(cls)
    unknown = sorted(set(pairs) - set(types))
    if strict and unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    kwargs = {k: parse_value(v, types[k], k) for k, v in pairs.items() if k in types}
    return cls(**kwargs)


def load(cls, text):
    return from_pairs(cls, parse_pairs(text))
