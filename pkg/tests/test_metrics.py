from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from factor_forge.metrics import (
    ANNUALIZATION,
    IcKind,
    MetricsError,
    aggregate_ic,
    bucket_profile,
    bucket_sizes,
    daily_ic,
    hac_test,
    jaccard_distance,
    newey_west_lag,
    significance_stars,
    turnover_rank,
    turnover_top_decile,
)
from factor_forge.panel import AlignedPair, FactorMatrix, LabelMatrix
from helpers import random_pair

TOL = 1e-10


def lists(pair):
    f = [[float(v) for v in row] for row in pair.factor.values]
    y = [[float(v) for v in row] for row in pair.labels.values]
    return f, y


def max_rel(actual, expected):
    return max((oracles.rel_err(float(a), float(e)) for a, e in zip(actual, expected)), default=0.0)


def one_date_pair(f, y):
    ids = [f"A{i}" for i in range(len(f))]
    return AlignedPair(
        factor=FactorMatrix(np.array([f], dtype=float), ["d"], ids),
        labels=LabelMatrix(np.array([y], dtype=float), ["d"], ids),
    )


def test_spearman_worked_value():
    ic = daily_ic(one_date_pair([1, 2, 3], [3, 1, 2]), IcKind.SPEARMAN)
    assert ic.values[0] == pytest.approx(-0.5, abs=1e-15)


def test_constant_row_gives_zero_ic():
    assert daily_ic(one_date_pair([1, 1, 1], [3, 1, 2]), "pearson").values[0] == 0.0
    assert daily_ic(one_date_pair([1, 2, 3], [2, 2, 2]), "spearman").values[0] == 0.0


@pytest.mark.parametrize("ties", [False, True])
def test_ic_matches_oracle(ties):
    rng = np.random.default_rng(101 + ties)
    for _ in range(100):
        pair = random_pair(rng, ties=ties)
        f, y = lists(pair)
        for kind in ("spearman", "pearson"):
            assert max_rel(daily_ic(pair, kind).values, oracles.daily_ic(f, y, kind)) <= TOL


def test_bucket_profile_matches_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        pair = random_pair(rng, ties=True)
        f, y = lists(pair)
        q = 5
        means, spreads = oracles.bucket_profile(f, y, list(pair.assets), q)
        prof = bucket_profile(pair, q)
        assert max_rel(prof.bucket_means, means) <= TOL
        assert max_rel(prof.long_short, spreads) <= TOL
        assert oracles.rel_err(prof.long_short_mean, oracles.mean(spreads)) <= TOL


def test_bucket_sizes_remainder_goes_to_top():
    assert bucket_sizes(23, 5) == [4, 4, 5, 5, 5]
    assert sum(bucket_sizes(101, 10)) == 101


def test_bucket_profile_skips_thin_dates_and_fails_when_all_thin():
    pair = one_date_pair([1, 2, 3], [1, 2, 3])
    with pytest.raises(MetricsError):
        bucket_profile(pair, 5)
    with pytest.raises(MetricsError):
        bucket_profile(pair, 1)


def test_turnovers_match_oracle():
    rng = np.random.default_rng(8)
    for _ in range(100):
        pair = random_pair(rng, ties=True)
        f, _ = lists(pair)
        assert oracles.rel_err(turnover_top_decile(pair), oracles.turnover_top_decile(f, list(pair.assets))) <= TOL
        assert oracles.rel_err(turnover_rank(pair), oracles.turnover_rank(f)) <= TOL


def test_turnover_extremes():
    stable = np.tile(np.arange(20.0), (5, 1))
    assert turnover_top_decile(stable) == 0.0 and turnover_rank(stable) == 0.0
    flip = np.array([np.arange(20.0), -np.arange(20.0)])
    assert turnover_top_decile(flip) == 1.0
    assert turnover_rank(flip) == pytest.approx(oracles.turnover_rank(flip.tolist()))


def test_jaccard_worked_value():
    assert jaccard_distance(frozenset("ab"), frozenset("bc")) == pytest.approx(2 / 3, abs=1e-15)
    assert jaccard_distance(frozenset(), frozenset()) == 0.0


def test_hac_lag_rule():
    assert newey_west_lag(195) == 4
    assert newey_west_lag(100) == 4
    assert newey_west_lag(30) == 3


def test_hac_matches_oracle():
    rng = np.random.default_rng(9)
    for _ in range(100):
        pair = random_pair(rng)
        f, y = lists(pair)
        for series in (oracles.daily_ic(f, y, "spearman"), oracles.daily_ic(f, y, "pearson")):
            res = hac_test(np.array(series))
            assert res.lag == newey_west_lag(30) == 3
            assert oracles.rel_err(res.t, oracles.hac_t(series, res.lag)) <= TOL
        means, spreads = oracles.bucket_profile(f, y, list(pair.assets), 5)
        assert oracles.rel_err(hac_test(np.array(spreads)).t, oracles.hac_t(spreads, newey_west_lag(len(spreads)))) <= TOL


def test_hac_lag_zero_is_classical_t():
    rng = np.random.default_rng(10)
    for _ in range(100):
        x = list(rng.normal(0.1, 1.0, size=int(rng.integers(8, 300))))
        assert oracles.rel_err(hac_test(np.array(x), lag=0).t, oracles.classical_t_population(x)) <= TOL


def test_hac_p_value_and_degenerate_cases():
    x = np.array([0.5, 1.5] * 10)
    res = hac_test(x, lag=0)
    assert res.p == pytest.approx(math.erfc(abs(res.t) / math.sqrt(2)))
    assert math.isnan(hac_test(np.ones(20)).t)
    assert math.isnan(hac_test(np.arange(7.0)).t)
    assert hac_test(np.array([1.0, np.nan] * 10)).n == 10


def test_significance_stars():
    assert significance_stars(0.004) == "**"
    assert significance_stars(0.0004) == "***"
    assert significance_stars(0.04) == "*"
    assert significance_stars(0.2) == ""
    assert significance_stars(float("nan")) == ""


def test_aggregate_ic():
    agg = aggregate_ic(np.array([0.1, 0.3]))
    assert agg.mean == pytest.approx(0.2)
    assert agg.std == pytest.approx(math.sqrt(0.02))
    assert agg.ir_annual == pytest.approx(agg.ir_daily * ANNUALIZATION)
    assert math.isnan(aggregate_ic(np.array([0.1, 0.1])).ir_annual)
    with pytest.raises(MetricsError):
        aggregate_ic(np.array([0.1]))


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=30), st.integers(0, 2**31))
@settings(max_examples=300, deadline=None)
def test_ic_bounded_and_rank_invariant(xs, seed):
    rng = np.random.default_rng(seed)
    ys = rng.normal(size=len(xs)).tolist()
    pair = one_date_pair(xs, ys)
    s = daily_ic(pair, "spearman").values[0]
    p = daily_ic(pair, "pearson").values[0]
    assert -1.0 <= s <= 1.0 and -1.0 <= p <= 1.0
    moved = [math.atan(v) * 3 + 7 for v in xs]
    monotone = one_date_pair(moved, ys)
    if len(set(moved)) == len(set(xs)):
        assert daily_ic(monotone, "spearman").values[0] == pytest.approx(s, abs=1e-12)


def test_ic_is_scale_free_at_extreme_magnitudes():
    f = [1e308, -1e308, 5e307, 0.0, 3e307]
    y = [1.0, -1.0, 0.5, 0.1, 0.2]
    small = [v / 1e300 for v in f]
    huge = daily_ic(one_date_pair(f, y), "pearson").values[0]
    assert huge == pytest.approx(daily_ic(one_date_pair(small, y), "pearson").values[0], abs=1e-12)
    assert huge == pytest.approx(oracles.pearson(small, y), abs=1e-12)
