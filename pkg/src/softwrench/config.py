"""Flat `key = value` config files and reproducibility echoes.

Files are UTF-8 text; `#` starts a comment, blank lines are ignored, values
are kept as strings and coerced where used. CLI flags override file values.
Every command writes the fully resolved mapping back into its output
directory so a run can be reproduced from the echo alone.
"""

from __future__ import annotations

from pathlib import Path


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def write_config_echo(out_dir, values: dict, name: str = "config_echo.txt") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"{k} = {values[k]}" for k in sorted(values)]
    path = out_dir / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def resolve(defaults: dict, file_values: dict, flag_values: dict) -> dict:
    """defaults < config file < explicit CLI flags."""
    out = dict(defaults)
    for k, v in file_values.items():
        if k not in out:
            raise KeyError(f"unknown config key {k!r}")
        out[k] = v
    for k, v in flag_values.items():
        if v is not None:
            out[k] = v
    return out
