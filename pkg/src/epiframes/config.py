"""``key=value`` configuration files.

One assignment per line; blank lines and ``#`` comments are ignored. Keys are
the field names of :class:`~epiframes.synthpop.SimConfig` and
:class:`~epiframes.harness.ExperimentConfig`; list-valued keys take
comma-separated values (``days=15,25,35``).
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def parse_key_values(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value
    return values


def read_key_values(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_key_values(text)
