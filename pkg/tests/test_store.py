from __future__ import annotations

import csv
import hashlib
import json
import math
import subprocess
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import pytest

from factor_forge.dsl import parse_formula
from factor_forge.evaluation import assess
from factor_forge.mining import run_mining
from factor_forge.panel import forward_returns
from factor_forge.store import (
    ArtifactCollisionError,
    LeakageError,
    NoSelectionError,
    ReportError,
    RunStore,
    RunStoreError,
    check_disjoint,
    emit_report,
    eval_report_from_dict,
    eval_report_to_dict,
    format_holdout_table,
    format_round_table,
    holdout_evaluate,
    report_number,
    summarize_rounds,
)
from factor_forge.synth import planted_ic, synth_panel
from helpers import KILL_SCRIPT

REPORT_FILES = (
    "summary.json",
    "topk.csv",
    "cumulative_ic.csv",
    "cumulative_long_short.csv",
    "best_bucket_profile.csv",
    "family_composition.csv",
)


def digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def tree_digest(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): digest(p) for p in sorted(root.rglob("*")) if p.is_file()}


def report_bytes(run_dir: Path) -> dict[str, bytes]:
    out = {name: (run_dir / "reports" / name).read_bytes() for name in REPORT_FILES}
    out["selection.json"] = (run_dir / "selection.json").read_bytes()
    return out


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def same_value(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a, dtype=float), np.asarray(b, dtype=float), equal_nan=True)
    if isinstance(a, float) and isinstance(b, float):
        return a == b or (math.isnan(a) and math.isnan(b))
    if hasattr(a, "__dataclass_fields__"):
        return type(a) is type(b) and all(same_value(getattr(a, f.name), getattr(b, f.name)) for f in fields(a))
    return a == b


@pytest.fixture(scope="module")
def mined_run(tmp_path_factory, small_panel):
    from factor_forge.config import RunConfig

    config = RunConfig(rounds=3, batch_size=20, top_k=5, family_cap=2, seed=11, duplicate_rate=0.15,
                       output_root=str(tmp_path_factory.mktemp("runs")))
    return run_mining(config, panel=small_panel)


# -- layout and records ----------------------------------------------------------


def test_init_run_layout(tmp_path):
    store = RunStore.init_run(tmp_path / "out", {"config": {"seed": 1}})
    for sub in ("rounds", "factors", "prompts", "reports"):
        assert (store.path / sub).is_dir()
    assert (store.path / "records.jsonl").read_bytes() == b""
    manifest = store.manifest
    assert manifest["run_id"] == store.run_id and manifest["config"] == {"seed": 1}
    assert store.position == 0


def test_run_ids_are_distinct_and_explicit_ids_never_reused(tmp_path):
    ids = {RunStore.init_run(tmp_path, {}).run_id for _ in range(5)}
    assert len(ids) == 5
    RunStore.init_run(tmp_path, {}, run_id="fixed")
    with pytest.raises(RunStoreError):
        RunStore.init_run(tmp_path, {}, run_id="fixed")


def test_unwritable_root_is_a_clear_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(RunStoreError, match="output root"):
        RunStore.init_run(blocker / "runs", {})
    with pytest.raises(RunStoreError, match="not a run directory"):
        RunStore(tmp_path)


def test_append_positions_and_record_types(tmp_path):
    store = RunStore.init_run(tmp_path, {})
    assert [store.append_record({"type": "candidate", "i": i}) for i in range(3)] == [1, 2, 3]
    with pytest.raises(RunStoreError):
        store.append_record({"type": "gossip"})
    assert [r["i"] for r in store.read_records()] == [0, 1, 2]
    assert RunStore(store.path).position == 3


def test_torn_final_line_is_truncated_on_open(tmp_path):
    store = RunStore.init_run(tmp_path, {})
    store.append_record({"type": "candidate", "i": 0})
    with open(store.path / "records.jsonl", "ab") as fh:
        fh.write(b'{"type": "candidate", "i"')
    reopened = RunStore(store.path)
    assert reopened.position == 1
    assert reopened.append_record({"type": "round", "i": 1}) == 2
    assert [r["i"] for r in reopened.read_records()] == [0, 1]
    assert (store.path / "records.jsonl").read_bytes().endswith(b"\n")


# -- artifacts -------------------------------------------------------------------


def test_artifact_round_trip_is_exact(tmp_path, small_panel, registry):
    labels = forward_returns(small_panel, 1)
    report = assess(parse_formula("TS_STD(TS_LOGRET(CLOSE, 1), 10)"), small_panel, labels, registry=registry)
    text = json.dumps(eval_report_to_dict(report), allow_nan=False)
    back = eval_report_from_dict(json.loads(text))
    assert same_value(back, report)
    assert json.dumps(eval_report_to_dict(back), allow_nan=False) == text


def test_artifact_collision_refused(tmp_path):
    store = RunStore.init_run(tmp_path, {})
    art = {"key": "0123456789abcdef", "formula": "CLOSE", "family": "other"}
    store.write_factor_artifact(art)
    with pytest.raises(ArtifactCollisionError):
        store.write_factor_artifact({**art, "formula": "OPEN"})
    assert store.read_factor_artifact(art["key"])["formula"] == "CLOSE"
    with pytest.raises(RunStoreError):
        store.factor_path("../escape")


def test_quarantine_moves_unlisted_artifacts(tmp_path):
    store = RunStore.init_run(tmp_path, {})
    keys = ["0" * 16, "1" * 16, "2" * 16]
    for k in keys:
        store.write_factor_artifact({"key": k})
    assert store.quarantine_factors([keys[0]]) == keys[1:]
    assert store.factor_keys() == [keys[0]]
    store.write_factor_artifact({"key": keys[1]})
    store.quarantine_factors([keys[0]])
    assert len(list((store.path / "factors" / ".orphaned").iterdir())) == 3


# -- reports ---------------------------------------------------------------------


def test_report_numbers():
    assert report_number(None) == "" and report_number(float("nan")) == ""
    assert report_number(0.1 + 0.2) == "0.3"
    assert report_number(3) == "3"


def test_report_regeneration_is_pure(mined_run):
    run_dir = mined_run.run_dir
    before = report_bytes(run_dir)
    for p in (run_dir / "reports").iterdir():
        p.unlink()
    (run_dir / "reports").rmdir()
    emit_report(run_dir)
    assert report_bytes(run_dir) == before


def test_report_contents_are_consistent(mined_run):
    run_dir = mined_run.run_dir
    summary = json.loads((run_dir / "reports" / "summary.json").read_text())
    rounds = summary["rounds"]
    for col in ("candidates", "evaluated", "ok", "errors"):
        assert summary["totals"][col] == sum(r[col] for r in rounds)
    comp = read_csv(run_dir / "reports" / "family_composition.csv")
    assert math.isclose(sum(float(r["pool_share"]) for r in comp), 1.0, abs_tol=1e-9)
    assert math.isclose(sum(float(r["topk_share"]) for r in comp), 1.0, abs_tol=1e-9)
    assert sum(int(r["pool_count"]) for r in comp) == summary["ok_candidates"]
    topk = read_csv(run_dir / "reports" / "topk.csv")
    assert [r["key"] for r in topk] == [s["key"] for s in summary["selected"]]
    store = RunStore(run_dir)
    ic = read_csv(run_dir / "reports" / "cumulative_ic.csv")
    first = [r for r in ic if r["id"] == topk[0]["id"]]
    rep = store.read_factor_artifact(topk[0]["key"])["report"]
    assert len(first) == len(rep["ic"]["dates"])
    assert float(first[-1]["cum_ic"]) == pytest.approx(sum(v for v in rep["ic"]["values"] if v is not None), rel=1e-9)
    assert "Round" in format_round_table(summarize_rounds(store.read_rounds()))


def test_report_needs_rounds(tmp_path):
    store = RunStore.init_run(tmp_path, {})
    with pytest.raises(ReportError):
        emit_report(store.path)


# -- holdout ---------------------------------------------------------------------


def frozen_run(tmp_path, discovery_end, formulas=("CLOSE",)):
    store = RunStore.init_run(
        tmp_path,
        {"config": {"horizon": 1, "min_assets": 30, "buckets": 10}, "discovery": {"start": "2020-01-01", "end": discovery_end}},
    )
    selected = [
        {"id": f"Other-{i + 1}", "key": f"{i:016x}", "formula": f, "family": "other", "score": 1.0}
        for i, f in enumerate(formulas)
    ]
    store.write_selection({"k": len(selected), "family_cap": 2, "selected": selected})
    return store


def test_check_disjoint():
    check_disjoint("2020-12-31", ["2021-01-01"])
    for cal in (["2020-12-31"], ["2020-06-01", "2021-06-01"], []):
        with pytest.raises(LeakageError):
            check_disjoint("2020-12-31", cal)


def test_holdout_refuses_overlap_and_writes_nothing(tmp_path):
    oos = synth_panel(40, 60, seed=5, start="2021-01-01")
    store = frozen_run(tmp_path, discovery_end=oos.calendar[10])
    before = tree_digest(store.path)
    with pytest.raises(LeakageError):
        holdout_evaluate(store.path, oos)
    assert tree_digest(store.path) == before


def test_holdout_requires_selection(tmp_path):
    store = RunStore.init_run(tmp_path, {"discovery": {"end": "2020-12-31"}})
    with pytest.raises(NoSelectionError):
        holdout_evaluate(store.path, synth_panel(40, 30, start="2021-06-01"))


def test_planted_signal_detected_out_of_sample(tmp_path):
    beta, sigma = 0.2, 1.0
    oos = synth_panel(200, 250, beta=beta, sigma=sigma, seed=21, start="2022-01-03")
    store = frozen_run(tmp_path, "2021-12-31", formulas=("CLOSE", "1 / (CLOSE - CLOSE)"))
    before = digest(store.path / "selection.json")
    result = holdout_evaluate(store.path, oos, tag="oos")
    assert digest(store.path / "selection.json") == before
    good, bad = result["rows"]
    assert good["status"] == "ok" and bad["status"].startswith("degenerate")
    assert good["ic"] == pytest.approx(planted_ic(beta, sigma), abs=0.02)
    assert good["ic_t"] > 3 and good["ic_stars"] == "***"
    out = Path(result["path"])
    assert out == store.path / "holdout" / "oos"
    table = read_csv(out / "oos_table.csv")
    assert [r["id"] for r in table] == ["Other-1", "Other-2"]
    assert json.loads((out / "oos_report.json").read_text())["oos"]["start"] == "2022-01-03"
    text = format_holdout_table(result)
    assert "***" in text and "degenerate" in text


# -- interruption and resume -----------------------------------------------------

@pytest.fixture(scope="module")
def reference_run(tmp_path_factory, small_panel):
    from factor_forge.config import RunConfig

    config = RunConfig(rounds=3, batch_size=20, top_k=5, family_cap=2, seed=11, duplicate_rate=0.15,
                       output_root=str(tmp_path_factory.mktemp("ref")))
    return run_mining(config, panel=small_panel)


@pytest.mark.parametrize("mode", ["between", "mid"])
def test_killed_run_resumes_to_identical_reports(tmp_path, mode, small_panel, reference_run):
    from factor_forge.mining import resume_run

    root = tmp_path / "runs"
    proc = subprocess.run([sys.executable, "-c", KILL_SCRIPT, mode, str(root)], capture_output=True, timeout=600)
    assert proc.returncode == 9, proc.stderr.decode()
    (run_dir,) = list(root.iterdir())
    assert not (run_dir / "selection.json").exists()
    checkpoint = RunStore(run_dir).read_checkpoint()
    assert checkpoint["completed_rounds"] == (2 if mode == "between" else 1)
    summary = resume_run(run_dir, panel=small_panel)
    assert summary.completed and [r["round"] for r in summary.rounds] == [1, 2, 3]
    assert report_bytes(run_dir) == report_bytes(reference_run.run_dir)
    records = RunStore(run_dir).read_records()
    resumes = [r for r in records if r["type"] == "error" and r.get("kind") == "resume"]
    if mode == "mid":
        assert len(resumes) == 1 and resumes[0]["orphaned_artifacts"]
        assert (run_dir / "factors" / ".orphaned").is_dir()
    else:
        assert resumes == []
