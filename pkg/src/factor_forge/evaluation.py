"""Full diagnostic report for one factor: evaluation, alignment and every statistic."""

from __future__ import annotations

import math
from dataclasses import dataclass

from factor_forge import engine
from factor_forge.dsl import ComplexityProfile, FormulaAst, OperatorRegistry, measure_complexity
from factor_forge.metrics import (
    DEFAULT_BUCKETS,
    BucketProfile,
    HacTest,
    IcAggregate,
    IcKind,
    IcSeries,
    TurnoverStats,
    aggregate_ic,
    bucket_profile,
    daily_ic,
    hac_test,
    turnover_rank,
    turnover_top_decile,
)
from factor_forge.panel import DEFAULT_MIN_ASSETS, AlignmentStats, LabelMatrix, Panel, align

METRIC_NAMES = (
    "rank_ic_mean",
    "rank_icir_ann",
    "ic_mean",
    "icir_ann",
    "long_short_mean",
    "turnover_top_decile",
    "turnover_rank",
    "coverage",
    "drop_ratio",
    "node_count",
)


class DegenerateFactor(ValueError):
    """The factor leaves too little aligned data to compute statistics."""


@dataclass(frozen=True)
class EvalReport:
    alignment: AlignmentStats
    rank_ic: IcSeries
    ic: IcSeries
    rank_ic_agg: IcAggregate
    ic_agg: IcAggregate
    buckets: BucketProfile
    turnover: TurnoverStats
    rank_ic_hac: HacTest
    ic_hac: HacTest
    long_short_hac: HacTest
    complexity: ComplexityProfile

    def metric_vector(self) -> dict[str, float]:
        return {
            "rank_ic_mean": self.rank_ic_agg.mean,
            "rank_icir_ann": self.rank_ic_agg.ir_annual,
            "ic_mean": self.ic_agg.mean,
            "icir_ann": self.ic_agg.ir_annual,
            "long_short_mean": self.buckets.long_short_mean,
            "turnover_top_decile": self.turnover.top_decile,
            "turnover_rank": self.turnover.rank,
            "coverage": self.alignment.coverage,
            "drop_ratio": self.alignment.drop_ratio,
            "node_count": float(self.complexity.node_count),
        }


def assess(
    ast: FormulaAst,
    panel: Panel,
    labels: LabelMatrix,
    *,
    registry: OperatorRegistry | None = None,
    min_assets: int = DEFAULT_MIN_ASSETS,
    buckets: int = DEFAULT_BUCKETS,
) -> EvalReport:
    """Evaluate ``ast`` on ``panel`` and compute the complete statistic set against ``labels``."""
    factor = engine.evaluate(ast, panel, registry)
    pair, stats = align(factor, labels, min_assets)
    if stats.valid_dates < 2:
        raise DegenerateFactor(f"only {stats.valid_dates} evaluation date(s) after alignment")
    rank_ic = daily_ic(pair, IcKind.SPEARMAN)
    ic = daily_ic(pair, IcKind.PEARSON)
    try:
        profile = bucket_profile(pair, buckets)
    except ValueError as exc:
        raise DegenerateFactor(str(exc)) from exc
    return EvalReport(
        alignment=stats,
        rank_ic=rank_ic,
        ic=ic,
        rank_ic_agg=aggregate_ic(rank_ic),
        ic_agg=aggregate_ic(ic),
        buckets=profile,
        turnover=TurnoverStats(top_decile=turnover_top_decile(pair), rank=turnover_rank(pair)),
        rank_ic_hac=hac_test(rank_ic.values),
        ic_hac=hac_test(ic.values),
        long_short_hac=hac_test(profile.long_short),
        complexity=measure_complexity(ast, registry),
    )


def is_missing(x: float) -> bool:
    return x is None or (isinstance(x, float) and math.isnan(x))


__all__ = ["METRIC_NAMES", "DegenerateFactor", "EvalReport", "assess", "is_missing"]
