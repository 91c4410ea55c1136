"""Run configuration: a TOML file with flat sections, overridable field by field."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from factor_forge.scoring import ScoreConfig, ScoreConfigError

GENERATORS = ("mock", "http")
PATH_FIELDS = ("data_path", "universe_path", "score_config_path", "corpus_path", "registry_path", "output_root")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    data_path: str | None = None
    universe_path: str | None = None
    start: str | None = None
    end: str | None = None
    horizon: int = 1
    min_assets: int = 30
    buckets: int = 10
    rounds: int = 3
    batch_size: int = 20
    top_k: int = 5
    family_cap: int = 2
    feedback: bool = True
    rag: bool = True
    positive_refs: int = 4
    negative_refs: int = 4
    generator: str = "mock"
    endpoint: str = ""
    model: str = ""
    timeout: float = 60.0
    seed: int = 0
    malformed_rate: float = 0.05
    duplicate_rate: float = 0.1
    max_depth: int = 12
    max_nodes: int = 64
    corpus_path: str | None = None
    registry_path: str | None = None
    score_config_path: str | None = None
    scoring: Mapping[str, Any] = field(default_factory=dict)
    output_root: str = "runs"

    def validate(self) -> RunConfig:
        for name in ("rounds", "batch_size", "top_k", "family_cap", "horizon", "min_assets", "max_depth", "max_nodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.buckets < 2:
            raise ConfigError("buckets must be at least 2")
        if self.positive_refs < 0 or self.negative_refs < 0:
            raise ConfigError("reference counts must be non-negative")
        if self.start and self.end and self.start > self.end:
            raise ConfigError(f"date range is not ordered: {self.start} > {self.end}")
        if self.generator not in GENERATORS:
            raise ConfigError(f"generator must be one of {GENERATORS}")
        if self.generator == "http" and not self.endpoint:
            raise ConfigError("http generator needs an endpoint")
        for name in ("malformed_rate", "duplicate_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        self.score_config()
        return self

    def score_config(self) -> ScoreConfig:
        raw: dict[str, Any] = {}
        if self.score_config_path:
            raw.update(_read_toml(self.score_config_path).get("scoring", {}))
        raw.update(self.scoring)
        raw["family_cap"] = self.family_cap
        try:
            return ScoreConfig.from_mapping(raw)
        except (ScoreConfigError, TypeError) as exc:
            raise ConfigError(f"invalid scoring config: {exc}") from exc

    def with_overrides(self, **overrides: Any) -> RunConfig:
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise ConfigError(f"unknown config field(s): {sorted(bad)}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["scoring"] = dict(self.scoring)
        return out

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> RunConfig:
        known = {f.name for f in fields(cls)}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown config key(s): {sorted(bad)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _read_toml(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    """Read a TOML run config. Sections are only for grouping: every key except
    those under ``[scoring]`` maps onto a :class:`RunConfig` field. Relative paths
    resolve against the config file's directory."""
    raw = _read_toml(path)
    flat: dict[str, Any] = {}
    for key, value in raw.items():
        if key == "scoring":
            flat["scoring"] = value
        elif isinstance(value, dict):
            for sub, v in value.items():
                if sub in flat:
                    raise ConfigError(f"key {sub!r} defined twice")
                flat[sub] = v
        else:
            flat[key] = value
    base = Path(path).resolve().parent
    for name in PATH_FIELDS:
        value = flat.get(name)
        if value and not Path(value).is_absolute():
            flat[name] = str(base / value)
    return RunConfig.from_dict(flat)
