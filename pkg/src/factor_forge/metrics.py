"""Per-factor statistics on an aligned factor/label pair."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd

from factor_forge.panel import AlignedPair

ANNUALIZATION = math.sqrt(252.0)
DEFAULT_BUCKETS = 10
MIN_HAC_LENGTH = 8


class IcKind(str, Enum):
    SPEARMAN = "spearman"
    PEARSON = "pearson"


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class IcSeries:
    dates: tuple[str, ...]
    values: np.ndarray
    kind: IcKind


@dataclass(frozen=True)
class IcAggregate:
    mean: float
    std: float
    ir_daily: float
    ir_annual: float


@dataclass(frozen=True)
class BucketProfile:
    bucket_count: int
    bucket_means: np.ndarray
    dates: tuple[str, ...]
    long_short: np.ndarray
    long_short_mean: float


@dataclass(frozen=True)
class TurnoverStats:
    top_decile: float
    rank: float


@dataclass(frozen=True)
class HacTest:
    mean: float
    se: float
    t: float
    p: float
    lag: int
    n: int

    @property
    def stars(self) -> str:
        return significance_stars(self.p)


MISSING_HAC = HacTest(math.nan, math.nan, math.nan, math.nan, 0, 0)


def _row_pearson(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pearson correlation per row over cells present in both; constant rows give 0."""
    mask = ~np.isnan(x) & ~np.isnan(y)
    n = mask.sum(axis=1)

    def _unit(a: np.ndarray) -> np.ndarray:
        # Correlation is scale-free; dividing by the row's largest magnitude keeps
        # sums of huge but finite values from overflowing.
        s = np.where(mask, np.abs(a), 0.0).max(axis=1, initial=0.0)
        return a / np.where(s > 0, s, 1.0)[:, None]

    x, y = _unit(x), _unit(y)
    xf = np.where(mask, x, 0.0)
    yf = np.where(mask, y, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mx = xf.sum(axis=1) / n
        my = yf.sum(axis=1) / n
        dx = np.where(mask, x - mx[:, None], 0.0)
        dy = np.where(mask, y - my[:, None], 0.0)
        sxy = (dx * dy).sum(axis=1)
        sxx = (dx * dx).sum(axis=1)
        syy = (dy * dy).sum(axis=1)
        corr = sxy / np.sqrt(sxx * syy)

    def _constant(a: np.ndarray) -> np.ndarray:
        hi = np.where(mask, a, -np.inf).max(axis=1)
        lo = np.where(mask, a, np.inf).min(axis=1)
        return hi == lo

    degenerate = (n < 2) | _constant(x) | _constant(y) | ~np.isfinite(corr)
    return np.clip(np.where(degenerate, 0.0, corr), -1.0, 1.0)


def _row_ranks(x: np.ndarray) -> np.ndarray:
    return pd.DataFrame(x).rank(axis=1, method="average").to_numpy(dtype=float)


def daily_ic(pair: AlignedPair, kind: IcKind | str = IcKind.SPEARMAN) -> IcSeries:
    kind = IcKind(kind)
    if not pair.calendar:
        raise MetricsError("empty evaluation calendar")
    x, y = pair.factor.values, pair.labels.values
    mask = ~np.isnan(x) & ~np.isnan(y)
    x = np.where(mask, x, np.nan)
    y = np.where(mask, y, np.nan)
    if kind is IcKind.SPEARMAN:
        x, y = _row_ranks(x), _row_ranks(y)
    return IcSeries(dates=pair.calendar, values=_row_pearson(x, y), kind=kind)


def aggregate_ic(series: IcSeries | np.ndarray) -> IcAggregate:
    values = np.asarray(series.values if isinstance(series, IcSeries) else series, dtype=float)
    if len(values) < 2:
        raise MetricsError("need at least two dates to aggregate")
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    if std > 0 and not np.all(values == values[0]):
        ir = mean / std
        return IcAggregate(mean, std, ir, ir * ANNUALIZATION)
    return IcAggregate(mean, 0.0, math.nan, math.nan)


def _asset_order(assets: tuple[str, ...]) -> np.ndarray:
    """Position of each asset in identifier order (used to break ties)."""
    order = np.argsort(np.array(assets, dtype=object), kind="stable")
    rank = np.empty(len(assets), dtype=np.int64)
    rank[order] = np.arange(len(assets))
    return rank


def bucket_sizes(n: int, buckets: int) -> list[int]:
    """Equal-count split; the top ``n % buckets`` buckets take one extra member."""
    base, rem = divmod(n, buckets)
    return [base + (1 if b >= buckets - rem else 0) for b in range(buckets)]


def bucket_profile(pair: AlignedPair, bucket_count: int = DEFAULT_BUCKETS) -> BucketProfile:
    if bucket_count < 2:
        raise MetricsError("bucket_count must be at least 2")
    x, y = pair.factor.values, pair.labels.values
    tie = _asset_order(pair.assets)
    sums = np.zeros(bucket_count)
    used_dates: list[str] = []
    spreads: list[float] = []
    for t, date in enumerate(pair.calendar):
        idx = np.flatnonzero(~np.isnan(x[t]) & ~np.isnan(y[t]))
        if len(idx) < bucket_count:
            continue
        order = idx[np.lexsort((tie[idx], x[t, idx]))]
        means = np.empty(bucket_count)
        start = 0
        for b, size in enumerate(bucket_sizes(len(order), bucket_count)):
            means[b] = y[t, order[start : start + size]].mean()
            start += size
        sums += means
        used_dates.append(date)
        spreads.append(means[-1] - means[0])
    if not used_dates:
        raise MetricsError("no date has enough assets for the requested buckets")
    ls = np.array(spreads)
    return BucketProfile(
        bucket_count=bucket_count,
        bucket_means=sums / len(used_dates),
        dates=tuple(used_dates),
        long_short=ls,
        long_short_mean=float(ls.mean()),
    )


def top_decile_sets(factor: np.ndarray, assets: tuple[str, ...]) -> list[frozenset[int]]:
    """Top ceil(n/10) present assets per date; equal values go to the lower identifier."""
    tie = _asset_order(assets)
    out = []
    for row in factor:
        idx = np.flatnonzero(~np.isnan(row))
        if len(idx) == 0:
            out.append(frozenset())
            continue
        k = math.ceil(len(idx) / 10)
        order = idx[np.lexsort((tie[idx], -row[idx]))]
        out.append(frozenset(order[:k].tolist()))
    return out


def jaccard_distance(a: frozenset, b: frozenset) -> float:
    union = len(a | b)
    if union == 0:
        return 0.0
    return 1.0 - len(a & b) / union


def turnover_top_decile(pair_or_factor, assets: tuple[str, ...] | None = None) -> float:
    factor, assets = _factor_and_assets(pair_or_factor, assets)
    if factor.shape[0] < 2:
        raise MetricsError("turnover needs at least two dates")
    sets = top_decile_sets(factor, assets)
    return float(np.mean([jaccard_distance(a, b) for a, b in zip(sets, sets[1:])]))


def turnover_rank(pair_or_factor, assets: tuple[str, ...] | None = None) -> float:
    """Mean absolute change of [0, 1]-normalised ranks between consecutive dates."""
    factor, _ = _factor_and_assets(pair_or_factor, assets)
    if factor.shape[0] < 2:
        raise MetricsError("turnover needs at least two dates")
    ranks = _row_ranks(factor)
    n = np.sum(~np.isnan(factor), axis=1, keepdims=True).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = np.where(n > 1, (ranks - 1.0) / (n - 1.0), 0.5)
    norm[np.isnan(factor)] = np.nan
    diffs = np.abs(norm[1:] - norm[:-1])
    per_pair = [float(d[~np.isnan(d)].mean()) for d in diffs if (~np.isnan(d)).any()]
    return float(np.mean(per_pair)) if per_pair else 0.0


def _factor_and_assets(obj, assets):
    if isinstance(obj, AlignedPair):
        return obj.factor.values, obj.assets
    values = np.asarray(getattr(obj, "values", obj), dtype=float)
    if assets is None:
        assets = getattr(obj, "assets", None) or tuple(f"{i:06d}" for i in range(values.shape[1]))
    return values, tuple(assets)


def newey_west_lag(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def significance_stars(p: float) -> str:
    if p is None or math.isnan(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def hac_test(series, lag: int | None = None) -> HacTest:
    """t-test of the series mean with a Bartlett-kernel (Newey-West) variance.

    Autocovariances use divisor T; p-values come from the normal distribution.
    Series shorter than 8 or constant give a missing test.
    """
    x = np.asarray(getattr(series, "values", series), dtype=float)
    x = x[~np.isnan(x)]
    n = len(x)
    if n < MIN_HAC_LENGTH or np.all(x == x[0]):
        return HacTest(float(x.mean()) if n else math.nan, math.nan, math.nan, math.nan, 0, n)
    lag = newey_west_lag(n) if lag is None else int(lag)
    lag = max(0, min(lag, n - 1))
    mean = float(x.mean())
    d = x - mean
    var = float(d @ d) / n
    for ell in range(1, lag + 1):
        gamma = float(d[ell:] @ d[:-ell]) / n
        var += 2.0 * (1.0 - ell / (lag + 1.0)) * gamma
    var /= n
    if not var > 0:
        return HacTest(mean, math.nan, math.nan, math.nan, lag, n)
    se = math.sqrt(var)
    t = mean / se
    p = math.erfc(abs(t) / math.sqrt(2.0))
    return HacTest(mean, se, t, p, lag, n)
