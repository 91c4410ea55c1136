from __future__ import annotations

import numpy as np
import pytest

from factor_forge.panel import (
    DataError,
    FactorMatrix,
    LabelMatrix,
    Panel,
    align,
    forward_returns,
    load_panel,
    panel_from_arrays,
    write_panel_csv,
)
from factor_forge.synth import synth_panel

HEADER = "date,asset,open,high,low,close,volume,vwap\n"


def _write(tmp_path, rows, name="panel.csv"):
    path = tmp_path / name
    path.write_text(HEADER + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


def test_load_long_csv_pivots_to_wide(tmp_path):
    path = _write(
        tmp_path,
        [
            "2024-01-03,B,10,11,9,10.5,100,10.2",
            "2024-01-02,A,5,6,4,5.5,200,5.1",
            "2024-01-02,B,10,11,9,10,100,10",
            "2024-01-03,A,5.5,6,5,5.8,150,5.6",
        ],
    )
    panel = load_panel(path)
    assert panel.calendar == ("2024-01-02", "2024-01-03")
    assert panel.assets == ("A", "B")
    assert panel["CLOSE"].tolist() == [[5.5, 10.0], [5.8, 10.5]]
    assert panel.load_report.rows == 4 and panel.load_report.sanity_violations == 0


def test_sanity_violations_blanked_and_counted(tmp_path):
    path = _write(
        tmp_path,
        [
            "2024-01-02,A,5,6,4,5.5,200,5.1",
            "2024-01-02,B,10,9,8,10,100,10",  # high below open
            "2024-01-03,A,5,6,4,-1,200,5.1",  # negative close
            "2024-01-03,B,10,11,9,10,-5,10",  # negative volume
        ],
    )
    panel = load_panel(path)
    assert panel.load_report.sanity_violations == 3
    assert np.isnan(panel["CLOSE"][0, 1]) and np.isnan(panel["OPEN"][1, 0]) and np.isnan(panel["VOLUME"][1, 1])
    assert panel["CLOSE"][0, 0] == 5.5


def test_duplicate_rows_rejected(tmp_path):
    path = _write(tmp_path, ["2024-01-02,A,5,6,4,5.5,200,5.1", "2024-01-02,A,5,6,4,5.5,200,5.1"])
    with pytest.raises(DataError, match="duplicate"):
        load_panel(path)


def test_missing_columns_and_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,asset,close\n2024-01-02,A,1\n")
    with pytest.raises(DataError, match="missing required columns"):
        load_panel(bad)
    with pytest.raises(DataError):
        load_panel(tmp_path / "nope.csv")
    baddate = _write(tmp_path, ["02/01/2024,A,5,6,4,5.5,200,5.1"], "baddate.csv")
    with pytest.raises(DataError, match="date"):
        load_panel(baddate)


def test_universe_and_date_filters(tmp_path):
    rows = [f"2024-01-0{d},{a},5,6,4,5,1,5" for d in (2, 3, 4) for a in ("A", "B", "C")]
    path = _write(tmp_path, rows)
    uni = tmp_path / "uni.txt"
    uni.write_text("# comment\nA\nC  # trailing\n")
    panel = load_panel(path, universe=uni, start="2024-01-03", end="2024-01-04")
    assert panel.assets == ("A", "C")
    assert panel.calendar == ("2024-01-03", "2024-01-04")
    with pytest.raises(DataError, match="empty"):
        load_panel(path, start="2025-01-01")


def test_valid_assets_reported_not_dropped(tmp_path):
    rows = [f"2024-01-{d:02d},A,5,6,4,5,1,5" for d in range(2, 12)]
    rows += [f"2024-01-{d:02d},B,5,6,4,5,1,5" for d in range(2, 5)]
    panel = load_panel(_write(tmp_path, rows))
    assert panel.assets == ("A", "B")
    assert panel.load_report.valid_assets == 1


def test_csv_round_trip(tmp_path):
    panel = synth_panel(5, 12, seed=2)
    path = tmp_path / "p.csv"
    write_panel_csv(panel, path, float_format="%.17g")
    back = load_panel(path)
    assert back.calendar == panel.calendar and back.assets == panel.assets
    for name in panel.fields:
        np.testing.assert_array_equal(back[name], panel[name])


def test_panel_is_immutable():
    panel = synth_panel(3, 5)
    with pytest.raises(ValueError):
        panel["CLOSE"][0, 0] = 1.0


def test_panel_axis_validation():
    close = np.ones((2, 2))
    with pytest.raises(DataError):
        panel_from_arrays(["2024-01-02", "2024-01-02"], ["A", "B"], CLOSE=close)
    with pytest.raises(DataError):
        panel_from_arrays(["2024-01-02", "2024-01-03"], ["A", "A"], CLOSE=close)
    with pytest.raises(DataError):
        Panel(calendar=["2024-01-02"], assets=["A", "B"], fields={"CLOSE": close})


def test_forward_returns_stored_at_decision_date():
    close = np.array([[100.0, 50.0], [110.0, 50.0], [99.0, 55.0]])
    panel = panel_from_arrays(["d1", "d2", "d3"], ["A", "B"], CLOSE=close)
    one = forward_returns(panel, 1).values
    np.testing.assert_allclose(one[0], [0.1, 0.0])
    np.testing.assert_allclose(one[1], [-0.1, 0.1])
    assert np.isnan(one[2]).all()
    two = forward_returns(panel, 2).values
    np.testing.assert_allclose(two[0], [-0.01, 0.1])
    assert np.isnan(two[1:]).all()
    with pytest.raises(ValueError):
        forward_returns(panel, 3)


def test_align_coverage_oracle():
    rng = np.random.default_rng(5)
    t, n = 12, 8
    f = rng.normal(size=(t, n))
    y = rng.normal(size=(t, n))
    f[rng.random((t, n)) < 0.3] = np.nan
    y[rng.random((t, n)) < 0.2] = np.nan
    y[-1] = np.nan
    cal = [f"d{i:02d}" for i in range(t)]
    ids = [f"A{j}" for j in range(n)]
    min_assets = 4
    pair, stats = align(FactorMatrix(f, cal, ids), LabelMatrix(y, cal, ids), min_assets)

    label_dates = [i for i in range(t) if any(not np.isnan(y[i, j]) for j in range(n))]
    kept, valid = [], 0
    for i in range(t):
        both = sum(1 for j in range(n) if not np.isnan(f[i, j]) and not np.isnan(y[i, j]))
        if both >= min_assets:
            kept.append(cal[i])
            valid += both
    total = len(label_dates) * n
    assert stats.total_cells == total
    assert stats.valid_cells == valid
    assert stats.valid_dates == len(kept)
    assert stats.coverage == pytest.approx(valid / total, abs=1e-15)
    assert stats.drop_ratio == pytest.approx(1 - valid / total, abs=1e-15)
    assert pair.calendar == tuple(kept)
    assert np.array_equal(np.isnan(pair.factor.values), np.isnan(pair.labels.values))


def test_align_axis_mismatch():
    f = FactorMatrix(np.zeros((2, 2)), ["a", "b"], ["X", "Y"])
    y = LabelMatrix(np.zeros((2, 2)), ["a", "b"], ["X", "Z"])
    with pytest.raises(ValueError):
        align(f, y)


def test_factor_matrix_maps_nonfinite_to_missing():
    m = FactorMatrix(np.array([[np.inf, -np.inf, 1.0]]), ["d"], ["A", "B", "C"])
    assert np.isnan(m.values[0, :2]).all() and m.values[0, 2] == 1.0


def test_fingerprint_sensitive_to_values():
    a = synth_panel(4, 10, seed=1)
    b = synth_panel(4, 10, seed=1)
    c = synth_panel(4, 10, seed=2)
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()
