"""Pipeline configuration: INI file + flag overrides + semantic hash.

The config file is plain key-value text with bracketed sections (parsed by
``configparser``); every value can also be overridden from the command
line. The config hash covers only semantics (window, thresholds, grids,
seeds, task, schema), not file locations, so the same inputs under a
different output directory still produce byte-identical artifacts.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from datetime import date
from pathlib import Path

from .errors import ConfigError
from .ingest import DEFAULT_COLUMNS, DEFAULT_DELIMITER, DEFAULT_WINDOW, TweetSchema

TASKS = ("regression", "classification", "cluster")


@dataclass(frozen=True)
class PipelineConfig:
    tweets_path: str = ""
    prices_path: str = ""
    out_dir: str = "out"
    # ingest
    columns: dict = field(default_factory=lambda: dict(DEFAULT_COLUMNS))
    delimiter: str = DEFAULT_DELIMITER
    timestamp_format: str = "iso8601"
    window_start: date = DEFAULT_WINDOW[0]
    window_end: date = DEFAULT_WINDOW[1]
    fill_policy: str = "forward_fill"
    # nlp
    neutral_tau: float = 0.05
    language_accept_threshold: float = 0.5
    stopword_weight: float = 0.6
    lexicon_path: str = ""
    # features / evaluation
    test_fraction: float = 0.1
    cv_folds: int = 5
    cv_shuffle: bool = False
    # run
    task: str = "regression"
    model: str = "all"
    seed: int = 42
    workers: int = 1
    # cluster
    cluster_k_max: int = 10
    cluster_sample_cap: int = 2000
    cluster_min_pts: int = 4
    # per-model grid overrides: {model_name: {param: [values]}}
    grids: dict = field(default_factory=dict)

    @property
    def window(self) -> tuple:
        return (self.window_start, self.window_end)

    def schema(self) -> TweetSchema:
        return TweetSchema(dict(self.columns), self.delimiter, self.timestamp_format)

    def effective_items(self) -> list:
        """Canonical (key, value) pairs covered by the config hash."""
        items = []
        skip = {"tweets_path", "prices_path", "out_dir", "workers"}
        for f in fields(self):
            if f.name in skip:
                continue
            value = getattr(self, f.name)
            if isinstance(value, dict):
                value = repr(sorted((k, repr(v)) for k, v in value.items()))
            items.append((f.name, str(value)))
        return sorted(items)

    def config_hash(self) -> str:
        payload = "\n".join(f"{k}={v}" for k, v in self.effective_items())
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def validate(self, require_inputs: bool = True) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if not (0.0 < self.test_fraction < 0.5):
            raise ConfigError("test_fraction must be in (0, 0.5)")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.neutral_tau <= 0:
            raise ConfigError("neutral_tau must be > 0")
        if not (0.0 <= self.language_accept_threshold <= 1.0):
            raise ConfigError("language_accept_threshold must be in [0, 1]")
        if not (0.0 <= self.stopword_weight <= 1.0):
            raise ConfigError("stopword_weight must be in [0, 1]")
        if self.window_start > self.window_end:
            raise ConfigError("window_start is after window_end")
        if self.fill_policy not in ("forward_fill", "drop"):
            raise ConfigError(f"unknown fill_policy {self.fill_policy!r}")
        if self.timestamp_format not in ("iso8601", "epoch"):
            raise ConfigError(f"unknown timestamp_format {self.timestamp_format!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an explicit integer")
        if require_inputs:
            for label, p in (("tweets", self.tweets_path), ("prices", self.prices_path)):
                if not p:
                    raise ConfigError(f"missing required path: {label}")
                if not Path(p).exists():
                    raise ConfigError(f"{label} path does not exist: {p}")
            if self.lexicon_path and not Path(self.lexicon_path).exists():
                raise ConfigError(f"lexicon path does not exist: {self.lexicon_path}")


def _parse_bool(raw: str) -> bool:
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def _parse_grid_value(raw: str):
    raw = raw.strip()
    if raw.lower() == "none":
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build the effective config: defaults, then file, then overrides."""
    cfg = PipelineConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path, encoding="utf-8")
        if not read:
            raise ConfigError(f"cannot read config file: {path}")
        updates: dict = {}
        columns = dict(DEFAULT_COLUMNS)
        grids: dict = {}
        for section in parser.sections():
            if section.startswith("grid."):
                model_name = section[len("grid."):]
                grids[model_name] = {
                    key: [_parse_grid_value(v) for v in raw.split(",")]
                    for key, raw in parser.items(section)
                }
                continue
            for key, raw in parser.items(section):
                if section == "ingest" and key.startswith("column_"):
                    columns[key[len("column_"):]] = raw
                    continue
                updates[key] = raw
        field_types = {f.name: f.type for f in fields(PipelineConfig)}
        parsed: dict = {}
        for key, raw in updates.items():
            name = {
                "tweets": "tweets_path",
                "prices": "prices_path",
                "out": "out_dir",
                "lexicon": "lexicon_path",
            }.get(key, key)
            if name not in field_types:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[name] = _coerce(name, raw)
        parsed["columns"] = columns
        if grids:
            parsed["grids"] = grids
        cfg = replace(cfg, **parsed)
    if overrides:
        clean = {k: v for k, v in overrides.items() if v is not None}
        if clean:
            cfg = replace(cfg, **clean)
    return cfg


_INT_FIELDS = {"seed", "workers", "cv_folds", "cluster_k_max", "cluster_sample_cap", "cluster_min_pts"}
_FLOAT_FIELDS = {"neutral_tau", "language_accept_threshold", "stopword_weight", "test_fraction"}
_BOOL_FIELDS = {"cv_shuffle"}
_DATE_FIELDS = {"window_start", "window_end"}


def _coerce(name: str, raw: str):
    try:
        if name in _INT_FIELDS:
            return int(raw)
        if name in _FLOAT_FIELDS:
            return float(raw)
        if name in _BOOL_FIELDS:
            return _parse_bool(raw)
        if name in _DATE_FIELDS:
            return date.fromisoformat(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw
