"""Minimal sectioned key=value file format used for configs and manifests.

Unlike configparser, section names may repeat (one `[constraint]` block per
entry).  Values are plain strings; `#` starts a comment; blank lines are
ignored.
"""

from __future__ import annotations

from .errors import ConfigError


def read_sections(path: str) -> list[tuple[str, dict[str, str]]]:
    sections: list[tuple[str, dict[str, str]]] = []
    current: dict[str, str] | None = None
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = {}
                sections.append((line[1:-1].strip(), current))
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key, value = line.split("=", 1)
            if current is None:
                current = {}
                sections.append(("", current))
            current[key.strip()] = value.strip()
    return sections


def write_sections(path: str, sections: list[tuple[str, dict[str, str]]]) -> None:
    with open(path, "w") as fh:
        for name, entries in sections:
            if name:
                fh.write(f"[{name}]\n")
            for key, value in entries.items():
                fh.write(f"{key} = {value}\n")
            fh.write("\n")


def get_float(section: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    try:
        return float(section[key])
    except ValueError as exc:
        raise ConfigError(f"key '{key}': not a number ({section[key]})") from exc


def get_int(section: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    try:
        return int(section[key])
    except ValueError as exc:
        raise ConfigError(f"key '{key}': not an integer ({section[key]})") from exc
