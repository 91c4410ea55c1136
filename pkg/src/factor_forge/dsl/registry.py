from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

PRICE_FIELDS = ("OPEN", "HIGH", "LOW", "CLOSE", "VWAP")
FIELDS = ("OPEN", "HIGH", "LOW", "CLOSE", "VOLUME", "VWAP")
MAX_WINDOW = 252


class OperatorKind(str, Enum):
    ARITHMETIC = "arithmetic"
    TIME_SERIES = "time-series"
    CROSS_SECTIONAL = "cross-sectional"
    LOGICAL = "logical"


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    arity: int
    kind: OperatorKind
    window_positions: frozenset[int] = frozenset()
    min_window: int = 1
    doc: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", OperatorKind(self.kind))
        object.__setattr__(self, "window_positions", frozenset(self.window_positions))
        if self.arity < 0:
            raise RegistryError(f"{self.name}: arity must be non-negative")
        bad = [p for p in self.window_positions if not 0 <= p < self.arity]
        if bad:
            raise RegistryError(f"{self.name}: window position(s) {sorted(bad)} outside arity {self.arity}")
        if not 1 <= self.min_window <= MAX_WINDOW:
            raise RegistryError(f"{self.name}: min_window out of range")


@dataclass(frozen=True)
class OperatorRegistry:
    operators: Mapping[str, OperatorSpec]
    fields: frozenset[str] = field(default_factory=lambda: frozenset(FIELDS))

    def lookup(self, name: str) -> OperatorSpec | None:
        return self.operators.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.operators

    def __len__(self) -> int:
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators.values())


def register_operators(
    specs: Iterable[OperatorSpec], fields: Iterable[str] = FIELDS
) -> OperatorRegistry:
    specs = list(specs)
    if not specs:
        raise RegistryError("at least one operator must be registered")
    table: dict[str, OperatorSpec] = {}
    for spec in specs:
        if spec.name in table:
            raise RegistryError(f"duplicate operator name {spec.name!r}")
        table[spec.name] = spec
    return OperatorRegistry(operators=table, fields=frozenset(fields))


DEFAULT_OPERATORS = (
    OperatorSpec("TS_SMA", 2, OperatorKind.TIME_SERIES, {1}, 1, "rolling mean of x over the last w dates"),
    OperatorSpec("TS_STD", 2, OperatorKind.TIME_SERIES, {1}, 2, "rolling sample standard deviation of x over w dates"),
    OperatorSpec("TS_VAR", 2, OperatorKind.TIME_SERIES, {1}, 2, "rolling sample variance of x over w dates"),
    OperatorSpec("TS_LOGRET", 2, OperatorKind.TIME_SERIES, {1}, 1, "log(x_t / x_{t-lag})"),
    OperatorSpec("CS_RANK", 1, OperatorKind.CROSS_SECTIONAL, (), 1, "cross-sectional rank scaled to [0, 1]"),
    OperatorSpec("CS_ZSCORE", 1, OperatorKind.CROSS_SECTIONAL, (), 1, "cross-sectional z-score"),
    OperatorSpec("IF", 3, OperatorKind.LOGICAL, (), 1, "IF(cond, a, b): a where cond is nonzero else b"),
)


def default_registry() -> OperatorRegistry:
    return register_operators(DEFAULT_OPERATORS)


def load_registry(path: str | Path) -> OperatorRegistry:
    """Load a registry file: ``{"fields": [...], "operators": [{"name", "arity", "kind", "window_positions", "min_window"?, "doc"?}]}``."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        specs = [
            OperatorSpec(
                name=str(op["name"]),
                arity=int(op["arity"]),
                kind=OperatorKind(op["kind"]),
                window_positions=frozenset(int(p) for p in op.get("window_positions", [])),
                min_window=int(op.get("min_window", 1)),
                doc=str(op.get("doc", "")),
            )
            for op in raw["operators"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise RegistryError(f"malformed registry file {path}: {exc}") from exc
    return register_operators(specs, raw.get("fields", FIELDS))
