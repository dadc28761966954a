"""Run configuration: defaults, flat key-value config files, flag overrides."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .features import FAMILIES


@dataclass
class RunConfig:
    # embeddings
    dim: int = 100
    window: int = 5
    epochs: int = 5
    negative: int = 5
    min_count: int = 5
    # forests
    n_trees: int = 10
    min_samples_split: int = 2
    # training set and labeling
    quota: int = 50_000
    min_freq: int = 50
    # polysemy
    p_max: int = 10
    sample_cap: int = 1000
    polysemy_min_freq: int = 20
    # active learning
    rounds: int = 2
    pool_size: int = 2000
    # normalization
    abbrev_scope: str = "corpus"
    families: tuple[str, ...] = FAMILIES
    seed: int = 1
    threads: int = 1
    eval_fraction: float = 0.2

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def update(self, values: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(self)}
        for key, raw in values.items():
            if raw is None:
                continue
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown configuration key {key!r}")
            setattr(self, key, _coerce(key, raw, getattr(self, key)))
        bad = set(self.families) - set(FAMILIES)
        if bad:
            raise ValueError(f"unknown feature families: {sorted(bad)}")
        if self.abbrev_scope not in ("corpus", "verbatim"):
            raise ValueError("abbrev_scope must be 'corpus' or 'verbatim'")
        return self

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["families"] = list(self.families)
        return d


def _coerce(key, raw, current):
    if isinstance(current, tuple):
        if isinstance(raw, str):
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return tuple(raw)
    if isinstance(raw, str):
        if isinstance(current, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    return raw


def read_config_file(path) -> dict[str, str]:
    """Parse `key = value` lines (an optional [section] header is ignored)."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser.read_string(text, source=str(path))
    out: dict[str, str] = {}
    for section in parser.sections():
        out.update(parser[section])
    return out
