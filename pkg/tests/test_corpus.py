from __future__ import annotations

import json
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factor_forge.corpus import (
    Corpus,
    CorpusEntry,
    CorpusError,
    CoverageState,
    load_corpus,
    negative_templates,
    retrieve_negative,
    retrieve_positive,
)
from factor_forge.dsl import THEMES, Family, canonicalize, parse_formula


def write_corpus(tmp_path, records):
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return path


def entry(id, channel="positive", family="range", formula="CLOSE", weight=1.0):
    return {"id": id, "channel": channel, "family": family, "formula": formula, "note": "", "weight": weight}


def test_load_small_corpus(tmp_path):
    path = write_corpus(tmp_path, [entry("a"), entry("b", family="volatility"), entry("c", "negative")])
    corpus = load_corpus(path)
    assert len(corpus) == 3
    assert len(corpus.channel("positive")) == 2 and len(corpus.channel("negative")) == 1
    assert corpus.by_id["b"].family is Family.VOLATILITY


def test_duplicate_identifier_named(tmp_path):
    with pytest.raises(CorpusError, match="'a'"):
        load_corpus(write_corpus(tmp_path, [entry("a"), entry("a")]))


@pytest.mark.parametrize("missing", ["channel", "family", "id", "formula"])
def test_missing_field_rejected(tmp_path, missing):
    rec = entry("a")
    del rec[missing]
    with pytest.raises(CorpusError):
        load_corpus(write_corpus(tmp_path, [rec]))


def test_bad_lines_rejected(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(write_corpus(tmp_path, [entry("a", channel="neutral")]))
    with pytest.raises(CorpusError):
        load_corpus(write_corpus(tmp_path, [entry("a", weight=-1)]))
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json\n")
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_unknown_family_maps_to_other_with_warning(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        corpus = load_corpus(write_corpus(tmp_path, [entry("a", family="astrology")]))
    assert corpus.by_id["a"].family is Family.OTHER
    assert "astrology" in caplog.text


def test_bundled_corpus_spans_all_themes():
    corpus = load_corpus()
    assert len(corpus) >= 12
    assert {e.family for e in corpus.channel("positive")} >= set(THEMES)
    assert corpus.channel("negative")
    assert any("VOLUME" in e.formula for e in corpus.channel("negative"))


def test_positive_least_covered_first():
    corpus = Corpus(
        (
            CorpusEntry("r1", "positive", Family.RANGE, "HIGH - LOW"),
            CorpusEntry("r2", "positive", Family.RANGE, "HIGH / LOW"),
            CorpusEntry("v1", "positive", Family.VOLATILITY, "TS_STD(TS_LOGRET(CLOSE, 1), 20)"),
        )
    )
    cov = CoverageState(run_counts={Family.RANGE: 10})
    out = retrieve_positive(corpus, cov, 3)
    assert out[0].id == "v1" and {e.id for e in out[1:]} == {"r1", "r2"}
    assert retrieve_positive(corpus, cov, 0) == []
    only_range = Corpus(tuple(e for e in corpus.entries if e.family is Family.RANGE))
    assert len(retrieve_positive(only_range, cov, 5)) == 2


def test_negative_order_and_ties():
    corpus = Corpus(
        (
            CorpusEntry("y", "negative", Family.OTHER, "CLOSE", weight=1.0),
            CorpusEntry("x", "negative", Family.OTHER, "OPEN", weight=2.0),
            CorpusEntry("a", "negative", Family.OTHER, "HIGH", weight=1.0),
        )
    )
    assert [e.id for e in retrieve_negative(corpus, 1)] == ["x"]
    assert [e.id for e in retrieve_negative(corpus, 3)] == ["x", "a", "y"]
    assert retrieve_negative(Corpus(()), 3) == []


def test_negative_templates_skip_placeholders(caplog):
    corpus = Corpus(
        (
            CorpusEntry("n1", "negative", Family.LIQUIDITY_VOLUME, "VOLUME / TS_SMA(VOLUME, 20)"),
            CorpusEntry("n2", "negative", Family.PRICE_TREND, "CLOSE / TS_SMA(CLOSE, <lag>)"),
            CorpusEntry("p1", "positive", Family.RANGE, "HIGH - LOW"),
        )
    )
    out = negative_templates(corpus)
    assert [canonicalize(a) for a in out] == [canonicalize(parse_formula("VOLUME / TS_SMA(VOLUME, 20)"))]
    assert negative_templates(Corpus(())) == []


@given(st.dictionaries(st.sampled_from(list(THEMES)), st.integers(0, 20)), st.integers(0, 2**31), st.integers(0, 14))
@settings(max_examples=200, deadline=None)
def test_retrieval_properties(counts, seed, n):
    corpus = load_corpus()
    cov = CoverageState(run_counts=dict(counts))
    out = retrieve_positive(corpus, cov, n, seed=seed)
    assert out == retrieve_positive(corpus, cov, n, seed=seed)
    assert len(out) <= n and all(e.channel == "positive" for e in out)
    assert all(e.channel == "negative" for e in retrieve_negative(corpus, n))
    first = {}
    for i, e in enumerate(out):
        first.setdefault(e.family, i)
    for fa, ia in first.items():
        for fb, ib in first.items():
            if cov.count(fa) < cov.count(fb):
                assert ia <= ib


def test_coverage_state_round_trip_and_explored():
    cov = CoverageState(run_counts={Family.RANGE: 6, Family.VOLATILITY: 0}, selected_counts={Family.RANGE: 1})
    back = CoverageState.from_dict(json.loads(json.dumps(cov.to_dict())))
    assert all(back.count(f) == cov.count(f) for f in Family)
    assert back.selected_counts == cov.selected_counts
    over, under = cov.explored()
    assert over == [Family.RANGE]
    assert Family.VOLATILITY in under and Family.RANGE not in under
