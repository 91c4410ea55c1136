"""Standardised multi-metric scoring and family-aware greedy selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

from factor_forge.dsl import Family, FormulaAst, formula_similarity


class ScoreConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MetricScale:
    center: float
    scale: float
    weight: float

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ScoreConfigError(f"scale must be positive, got {self.scale}")


DEFAULT_METRIC_SCALES: dict[str, MetricScale] = {
    "rank_ic_mean": MetricScale(0.0, 0.01, 2.0),
    "rank_icir_ann": MetricScale(0.0, 0.5, 1.5),
    "ic_mean": MetricScale(0.0, 0.01, 1.0),
    "icir_ann": MetricScale(0.0, 0.5, 1.0),
    "long_short_mean": MetricScale(0.0, 0.0005, 1.5),
    "turnover_top_decile": MetricScale(0.15, 0.15, -1.0),
    "turnover_rank": MetricScale(0.15, 0.15, -0.5),
    "coverage": MetricScale(0.9, 0.1, 0.5),
    "drop_ratio": MetricScale(0.1, 0.1, -0.5),
    "node_count": MetricScale(20.0, 20.0, -0.25),
}


@dataclass(frozen=True)
class ScoreConfig:
    metrics: Mapping[str, MetricScale] = field(default_factory=lambda: dict(DEFAULT_METRIC_SCALES))
    crowding_scale: float = 1.0
    similarity_scale: float = 1.0
    family_scale: float = 0.3
    novelty_bonus: float = 0.2
    similarity_threshold: float = 0.6
    family_cap: int = 2

    def __post_init__(self) -> None:
        if not 0.0 < self.similarity_threshold < 1.0:
            raise ScoreConfigError("similarity_threshold must lie in (0, 1)")
        if self.family_cap < 1:
            raise ScoreConfigError("family_cap must be at least 1")
        for name in ("crowding_scale", "similarity_scale", "family_scale", "novelty_bonus"):
            if getattr(self, name) < 0:
                raise ScoreConfigError(f"{name} must be non-negative")

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> ScoreConfig:
        """Build from a config table; metric entries override the defaults one by one."""
        metrics = dict(DEFAULT_METRIC_SCALES)
        for name, entry in (raw.get("metrics") or {}).items():
            base = metrics.get(name)
            try:
                metrics[name] = MetricScale(
                    center=float(entry.get("center", base.center if base else 0.0)),
                    scale=float(entry.get("scale", base.scale if base else 1.0)),
                    weight=float(entry.get("weight", base.weight if base else 0.0)),
                )
            except (AttributeError, TypeError) as exc:
                raise ScoreConfigError(f"bad metric entry {name!r}: {exc}") from exc
        known = {f for f in cls.__dataclass_fields__ if f != "metrics"}
        unknown = set(raw) - known - {"metrics"}
        if unknown:
            raise ScoreConfigError(f"unknown score config keys: {sorted(unknown)}")
        return cls(metrics=metrics, **{k: raw[k] for k in known if k in raw})

    def to_dict(self) -> dict[str, Any]:
        return {
            "metrics": {
                k: {"center": v.center, "scale": v.scale, "weight": v.weight} for k, v in self.metrics.items()
            },
            "crowding_scale": self.crowding_scale,
            "similarity_scale": self.similarity_scale,
            "family_scale": self.family_scale,
            "novelty_bonus": self.novelty_bonus,
            "similarity_threshold": self.similarity_threshold,
            "family_cap": self.family_cap,
        }


def standardize(m: float, c: float, s: float) -> float:
    if not s > 0:
        raise ScoreConfigError("scale must be positive")
    return math.tanh((m - c) / s)


def base_score(metrics: Mapping[str, float], config: ScoreConfig) -> float:
    """Weighted sum of tanh-standardised metrics; missing values contribute 0."""
    unknown = [name for name in metrics if name not in config.metrics]
    if unknown:
        raise ScoreConfigError(f"no scale/weight configured for metric(s) {unknown}")
    total = 0.0
    for name, value in metrics.items():
        if value is None or not math.isfinite(value):
            continue
        scale = config.metrics[name]
        total += scale.weight * standardize(value, scale.center, scale.scale)
    return total


def _proximity_penalty(max_similarity: float, threshold: float, scale: float) -> float:
    return scale * max(0.0, max_similarity - threshold) / (1.0 - threshold)


def crowding_penalty(candidate: FormulaAst, negatives: Sequence[FormulaAst], config: ScoreConfig) -> float:
    if not negatives:
        return 0.0
    top = max(formula_similarity(candidate, neg) for neg in negatives)
    return _proximity_penalty(top, config.similarity_threshold, config.crowding_scale)


def similarity_penalty(candidate: FormulaAst, selected: Sequence[Any], config: ScoreConfig) -> float:
    asts = [getattr(s, "ast", s) for s in selected]
    if not asts:
        return 0.0
    top = max(formula_similarity(candidate, other) for other in asts)
    return _proximity_penalty(top, config.similarity_threshold, config.similarity_scale)


def family_adjustments(family: Family, selected_counts: Mapping[Family, int], config: ScoreConfig) -> tuple[float, float]:
    count = selected_counts.get(family, 0)
    penalty = config.family_scale * count
    bonus = config.novelty_bonus if count == 0 else 0.0
    return penalty, bonus


@dataclass(frozen=True)
class ScoredCandidate:
    formula: str
    key: str
    family: Family
    ast: FormulaAst = field(compare=False, repr=False)
    metrics: Mapping[str, float] = field(default_factory=dict)
    base: float = 0.0
    crowded: float = 0.0
    similar: float = 0.0
    family_penalty: float = 0.0
    novelty: float = 0.0
    selected: bool = False
    round_index: int = 0

    @property
    def adjusted(self) -> float:
        return self.base - self.crowded - self.similar - self.family_penalty + self.novelty

    @property
    def score(self) -> float:
        """Selection-independent score (base minus crowding)."""
        return self.base - self.crowded


def score_candidate(
    formula: str,
    key: str,
    family: Family,
    ast: FormulaAst,
    metrics: Mapping[str, float],
    negatives: Sequence[FormulaAst],
    config: ScoreConfig,
    round_index: int = 0,
) -> ScoredCandidate:
    return ScoredCandidate(
        formula=formula,
        key=key,
        family=family,
        ast=ast,
        metrics=dict(metrics),
        base=base_score(metrics, config),
        crowded=crowding_penalty(ast, negatives, config),
        round_index=round_index,
    )


def select_top_k(candidates: Sequence[ScoredCandidate], k: int, config: ScoreConfig) -> list[ScoredCandidate]:
    """Greedy family-capped selection.

    Each step rescores every eligible candidate against the current selection and
    takes the highest adjusted score (ties: smaller canonical key). Families at the
    cap are ineligible. Returns copies carrying the penalties in force when picked.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    pool: dict[str, ScoredCandidate] = {}
    for cand in candidates:
        pool.setdefault(cand.key, cand)
    remaining = sorted(pool.values(), key=lambda c: c.key)
    chosen: list[ScoredCandidate] = []
    counts: dict[Family, int] = {}
    while len(chosen) < k:
        best: ScoredCandidate | None = None
        for cand in remaining:
            if counts.get(cand.family, 0) >= config.family_cap:
                continue
            fam_pen, bonus = family_adjustments(cand.family, counts, config)
            trial = replace(
                cand,
                similar=similarity_penalty(cand.ast, chosen, config),
                family_penalty=fam_pen,
                novelty=bonus,
            )
            if best is None or trial.adjusted > best.adjusted:
                best = trial
        if best is None:
            break
        best = replace(best, selected=True)
        chosen.append(best)
        counts[best.family] = counts.get(best.family, 0) + 1
        remaining = [c for c in remaining if c.key != best.key]
    return chosen
