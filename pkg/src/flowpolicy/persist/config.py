"""Line-oriented `key = value` config files with `#` comments."""

from __future__ import annotations

from pathlib import Path

__all__ = ["ConfigError", "parse_config", "load_config", "coerce"]


class ConfigError(ValueError):
    """Malformed config line, unknown key, or unconvertible value."""


def parse_config(text: str) -> dict:
    """Parse config text into an ordered {key: raw string value} dict."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def coerce(key: str, value: str, target_type):
    """Convert a raw config string to the schema type."""
    try:
        if target_type is bool:
            low = value.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if target_type is tuple:
            return tuple(int(v) for v in value.split(",") if v.strip())
        return target_type(value)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {value!r} as {target_type.__name__}") from exc


def load_config(path, schema: dict) -> dict:
    """Read and validate a config file against {key: type}; unknown keys error."""
    text = Path(path).read_text(encoding="utf-8")
    raw = parse_config(text)
    out = {}
    for key, value in raw.items():
        if key not in schema:
            known = ", ".join(sorted(schema))
            raise ConfigError(f"unknown config key {key!r} (known keys: {known})")
        out[key] = coerce(key, value, schema[key])
    return out
