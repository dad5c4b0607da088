"""Flat key-value / JSON configuration files.

Key-value files hold one ``key = value`` (or ``key: value``) pair per line;
blank lines and ``#`` comments are ignored. Keys may use dashes or
underscores.
"""

from __future__ import annotations

import json
from dataclasses import asdict, fields
from pathlib import Path

from .trajectories import Mu0Config


def load_config(path) -> dict:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
    else:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            sep = "=" if "=" in line else ":"
            if sep not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split(sep, 1))
            data[key] = value
    return {k.replace("-", "_"): v for k, v in data.items()}


def write_config(path, data: dict) -> None:
    with open(path, "w") as fh:
        for key in sorted(data):
            fh.write(f"{key} = {data[key]}\n")


def mu0_config_from_file(path) -> Mu0Config:
    """Read a :class:`Mu0Config` from a key-value or JSON file (keys a, b, h, sigma_start, sigma_tv, q, seed)."""
    raw = load_config(path)
    known = {f.name: f.type for f in fields(Mu0Config)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ValueError(f"unknown mu0 config keys: {sorted(unknown)}")
    kwargs = {k: (int(v) if k == "seed" else float(v)) for k, v in raw.items()}
    return Mu0Config(**kwargs)


def write_mu0_config(path, cfg: Mu0Config) -> None:
    write_config(path, asdict(cfg))
