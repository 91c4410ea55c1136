"""Run directories: immutable manifest, append-only records, per-factor artifacts,
prompt snapshots, round summaries, reports and holdout tables.

Layout (all paths relative to ``<output-root>/<run-id>/``)::

    manifest.json            written once at start
    records.jsonl            one JSON object per line, ``type`` in {candidate, round, error}
    rounds/round-<n>.json    per-round summary
    factors/<key>.json       full diagnostics of every ok candidate
    prompts/round-<n>-<batch>.json
    checkpoint.json          state needed to resume after the last completed round
    selection.json           frozen final top-k
    reports/                 summary.json, topk.csv and plot-data CSVs
    holdout/<tag>/           out-of-sample tables
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import re
import secrets
import shutil
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from factor_forge.dsl import ComplexityProfile, Family, OperatorRegistry
from factor_forge.evaluation import EvalReport
from factor_forge.metrics import (
    BucketProfile,
    HacTest,
    IcAggregate,
    IcKind,
    IcSeries,
    TurnoverStats,
)
from factor_forge.panel import AlignmentStats

log = logging.getLogger(__name__)

ARTIFACT_SCHEMA = 1
RECORD_TYPES = ("candidate", "round", "error")
REPORT_DIGITS = 12
SUBDIRS = ("rounds", "factors", "prompts", "reports")
ORPHAN_DIR = ".orphaned"


class RunStoreError(RuntimeError):
    pass


class ArtifactCollisionError(RunStoreError):
    """A factor artifact with the same canonical key already exists."""


class LeakageError(RunStoreError):
    """The out-of-sample window overlaps or precedes the discovery window."""


class NoSelectionError(RunStoreError):
    pass


class ReportError(RunStoreError):
    pass


# -- serialisation -------------------------------------------------------------


def jsonable(obj: Any) -> Any:
    """Plain JSON structure; NaN and infinities become ``null``."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(jsonable(k)): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int | None = None) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=indent, allow_nan=False, ensure_ascii=False)


def _num(x: Any) -> float:
    return math.nan if x is None else float(x)


def _arr(xs: Sequence[Any]) -> np.ndarray:
    return np.array([_num(x) for x in xs], dtype=float)


def _hac_to_dict(h: HacTest) -> dict:
    out = jsonable(h)
    out["stars"] = h.stars
    return out


def _hac_from_dict(d: Mapping) -> HacTest:
    return HacTest(
        mean=_num(d["mean"]), se=_num(d["se"]), t=_num(d["t"]), p=_num(d["p"]), lag=int(d["lag"]), n=int(d["n"])
    )


def _ic_from_dict(d: Mapping) -> IcSeries:
    return IcSeries(dates=tuple(d["dates"]), values=_arr(d["values"]), kind=IcKind(d["kind"]))


def _agg_from_dict(d: Mapping) -> IcAggregate:
    return IcAggregate(*(_num(d[k]) for k in ("mean", "std", "ir_daily", "ir_annual")))


def eval_report_to_dict(report: EvalReport) -> dict:
    out = jsonable(report)
    for name in ("rank_ic_hac", "ic_hac", "long_short_hac"):
        out[name] = _hac_to_dict(getattr(report, name))
    return out


def eval_report_from_dict(d: Mapping) -> EvalReport:
    b = d["buckets"]
    a = d["alignment"]
    return EvalReport(
        alignment=AlignmentStats(
            coverage=_num(a["coverage"]),
            drop_ratio=_num(a["drop_ratio"]),
            valid_cells=int(a["valid_cells"]),
            valid_dates=int(a["valid_dates"]),
            total_cells=int(a["total_cells"]),
        ),
        rank_ic=_ic_from_dict(d["rank_ic"]),
        ic=_ic_from_dict(d["ic"]),
        rank_ic_agg=_agg_from_dict(d["rank_ic_agg"]),
        ic_agg=_agg_from_dict(d["ic_agg"]),
        buckets=BucketProfile(
            bucket_count=int(b["bucket_count"]),
            bucket_means=_arr(b["bucket_means"]),
            dates=tuple(b["dates"]),
            long_short=_arr(b["long_short"]),
            long_short_mean=_num(b["long_short_mean"]),
        ),
        turnover=TurnoverStats(top_decile=_num(d["turnover"]["top_decile"]), rank=_num(d["turnover"]["rank"])),
        rank_ic_hac=_hac_from_dict(d["rank_ic_hac"]),
        ic_hac=_hac_from_dict(d["ic_hac"]),
        long_short_hac=_hac_from_dict(d["long_short_hac"]),
        complexity=ComplexityProfile(**{k: int(v) for k, v in d["complexity"].items()}),
    )


def factor_artifact(candidate: Any, report: EvalReport) -> dict:
    """Self-contained per-factor record: identity, complexity, every statistic and the score breakdown."""
    return {
        "schema": ARTIFACT_SCHEMA,
        "key": candidate.key,
        "formula": candidate.formula,
        "family": Family(candidate.family).value,
        "round": candidate.round_index,
        "complexity": jsonable(report.complexity),
        "metrics": jsonable(candidate.metrics),
        "score": {"base": candidate.base, "crowded": candidate.crowded, "score": candidate.score},
        "report": eval_report_to_dict(report),
    }


def report_number(x: Any) -> str:
    """Decimal string with 12 significant digits; missing values render empty."""
    if x is None:
        return ""
    x = float(x)
    if not math.isfinite(x):
        return ""
    if x == 0:
        return "0"
    return format(x, f".{REPORT_DIGITS}g")


def _round_float(x: Any) -> float | None:
    s = report_number(x)
    return float(s) if s else None


# -- file helpers ----------------------------------------------------------------


def _fsync_dir(path: Path) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    _fsync_dir(path.parent)


def _read_json(path: Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    os.replace(tmp, path)


def new_run_id(now: datetime | None = None) -> str:
    now = now or datetime.now(timezone.utc)
    return f"{now:%Y%m%dT%H%M%S}-{secrets.token_hex(4)}"


def _round_number(path: Path) -> int:
    m = re.fullmatch(r"round-(\d+)\.json", path.name)
    return int(m.group(1)) if m else -1


# -- the store -------------------------------------------------------------------


class RunStore:
    """Single writer over one run directory."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        if not (self.path / "manifest.json").is_file():
            raise RunStoreError(f"{self.path} is not a run directory (no manifest.json)")
        self._position = self._recover_records()

    @classmethod
    def init_run(cls, output_root: str | Path, manifest: Mapping[str, Any], run_id: str | None = None) -> RunStore:
        root = Path(output_root)
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise RunStoreError(f"cannot create output root {root}: {exc}") from exc
        path = None
        for _ in range(32):
            rid = run_id or new_run_id()
            candidate = root / rid
            try:
                candidate.mkdir()
            except FileExistsError:
                if run_id:
                    raise RunStoreError(f"run directory {candidate} already exists") from None
                continue
            except OSError as exc:
                raise RunStoreError(f"cannot initialise run directory under {root}: {exc}") from exc
            path = candidate
            break
        if path is None:
            raise RunStoreError("could not allocate a unique run id")
        for sub in SUBDIRS:
            (path / sub).mkdir()
        body = {"run_id": path.name, "created": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        body.update(manifest)
        with open(path / "manifest.json", "x", encoding="utf-8") as fh:
            fh.write(dumps(body, indent=2) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        (path / "records.jsonl").touch()
        _fsync_dir(path)
        return cls(path)

    @property
    def run_id(self) -> str:
        return self.path.name

    @property
    def manifest(self) -> dict:
        return _read_json(self.path / "manifest.json")

    @property
    def position(self) -> int:
        return self._position

    # records

    def _recover_records(self) -> int:
        path = self.path / "records.jsonl"
        if not path.exists():
            return 0
        data = path.read_bytes()
        if data and not data.endswith(b"\n"):
            # A torn final line can only come from an interrupted write; drop it
            # so the next append starts on a clean line boundary.
            keep = data.rfind(b"\n") + 1
            log.warning("records file ends in a partial line; truncating %d byte(s)", len(data) - keep)
            with open(path, "r+b") as fh:
                fh.truncate(keep)
            data = data[:keep]
        return data.count(b"\n")

    def append_record(self, record: Mapping[str, Any]) -> int:
        if record.get("type") not in RECORD_TYPES:
            raise RunStoreError(f"record type must be one of {RECORD_TYPES}")
        line = dumps(record) + "\n"
        with open(self.path / "records.jsonl", "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        self._position += 1
        return self._position

    def read_records(self) -> list[dict]:
        out = []
        with open(self.path / "records.jsonl", encoding="utf-8") as fh:
            for line in fh:
                if line.endswith("\n"):
                    out.append(json.loads(line))
        return out

    # factor artifacts

    def factor_path(self, key: str) -> Path:
        if not re.fullmatch(r"[0-9a-f]{16}", key):
            raise RunStoreError(f"malformed canonical key {key!r}")
        return self.path / "factors" / f"{key}.json"

    def write_factor_artifact(self, artifact: Mapping[str, Any]) -> Path:
        path = self.factor_path(artifact["key"])
        try:
            with open(path, "x", encoding="utf-8") as fh:
                fh.write(dumps(artifact) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except FileExistsError:
            raise ArtifactCollisionError(f"artifact for key {artifact['key']} already exists") from None
        return path

    def read_factor_artifact(self, key: str) -> dict:
        return _read_json(self.factor_path(key))

    def factor_keys(self) -> list[str]:
        return sorted(p.stem for p in (self.path / "factors").glob("*.json"))

    def quarantine_factors(self, keep: Iterable[str]) -> list[str]:
        """Move artifacts not in ``keep`` (left by an interrupted round) aside."""
        keep = set(keep)
        moved = []
        orphan_dir = self.path / "factors" / ORPHAN_DIR
        for key in self.factor_keys():
            if key in keep:
                continue
            orphan_dir.mkdir(exist_ok=True)
            target = orphan_dir / f"{key}.json"
            n = 1
            while target.exists():
                target = orphan_dir / f"{key}.{n}.json"
                n += 1
            shutil.move(str(self.factor_path(key)), target)
            moved.append(key)
        return moved

    # snapshots and summaries

    def write_prompt(self, round_index: int, batch: str, snapshot: Mapping[str, Any]) -> Path:
        path = self.path / "prompts" / f"round-{round_index}-{batch}.json"
        atomic_write_text(path, dumps(snapshot, indent=2) + "\n")
        return path

    def write_round(self, round_index: int, summary: Mapping[str, Any]) -> Path:
        path = self.path / "rounds" / f"round-{round_index}.json"
        atomic_write_text(path, dumps(summary, indent=2) + "\n")
        return path

    def read_rounds(self) -> list[dict]:
        paths = sorted((self.path / "rounds").glob("round-*.json"), key=_round_number)
        return [_read_json(p) for p in paths if _round_number(p) >= 1]

    def write_checkpoint(self, state: Mapping[str, Any]) -> None:
        atomic_write_text(self.path / "checkpoint.json", dumps(state) + "\n")

    def read_checkpoint(self) -> dict | None:
        path = self.path / "checkpoint.json"
        return _read_json(path) if path.exists() else None

    def write_selection(self, selection: Mapping[str, Any]) -> None:
        atomic_write_text(self.path / "selection.json", dumps(selection, indent=2) + "\n")

    def read_selection(self) -> dict | None:
        path = self.path / "selection.json"
        return _read_json(path) if path.exists() else None


# -- reports ---------------------------------------------------------------------

TOPK_COLUMNS = (
    "id",
    "family",
    "score",
    "rank_ic",
    "rank_icir_ann",
    "ic",
    "icir_ann",
    "long_short",
    "turnover",
    "key",
    "formula",
)
ROUND_COLUMNS = ("candidates", "evaluated", "ok", "errors")


def summarize_rounds(rounds: Sequence[Mapping[str, Any]]) -> dict:
    rows = []
    for r in rounds:
        row = {"round": int(r["round"])}
        row.update({c: int(r["counts"][c]) for c in ROUND_COLUMNS})
        row["best_score"] = _round_float(r.get("best_score"))
        rows.append(row)
    totals = {c: sum(row[c] for row in rows) for c in ROUND_COLUMNS}
    scored = [row for row in rows if row["best_score"] is not None]
    best = max(scored, key=lambda row: (row["best_score"], -row["round"])) if scored else None
    totals["best_score"] = best["best_score"] if best else None
    return {"rounds": rows, "totals": totals, "best_round": best["round"] if best else None}


def format_round_table(summary: Mapping[str, Any]) -> str:
    header = f"{'Round':<7}{'Candidates':>11}{'Evaluated':>11}{'OK':>7}{'Errors':>8}{'Best Score':>13}"
    lines = [header]

    def line(label: str, row: Mapping[str, Any]) -> str:
        best = row.get("best_score")
        best_text = f"{best:.4f}" if best is not None else "-"
        return (
            f"{label:<7}{row['candidates']:>11}{row['evaluated']:>11}{row['ok']:>7}{row['errors']:>8}{best_text:>13}"
        )

    for row in summary["rounds"]:
        lines.append(line(f"R{row['round']}", row))
    lines.append(line("Total", summary["totals"]))
    return "\n".join(lines)


def _cumulative(values: Sequence[Any]) -> list[float]:
    total = 0.0
    out = []
    for v in values:
        if v is not None:
            total += float(v)
        out.append(total)
    return out


def emit_report(run_dir: str | Path) -> dict[str, Path]:
    """Regenerate every report file from what is on disk; returns the written paths."""
    store = RunStore(run_dir)
    rounds = store.read_rounds()
    if not rounds:
        raise ReportError(f"run {store.run_id} has no completed rounds")
    out_dir = store.path / "reports"
    out_dir.mkdir(exist_ok=True)
    summary = summarize_rounds(rounds)
    selection = store.read_selection() or {"selected": []}
    selected = selection.get("selected", [])
    artifacts = {s["key"]: store.read_factor_artifact(s["key"]) for s in selected}
    summary["selected"] = [{"id": s["id"], "key": s["key"], "family": s["family"]} for s in selected]
    summary["ok_candidates"] = len(store.factor_keys())
    paths = {"summary": out_dir / "summary.json"}
    atomic_write_text(paths["summary"], dumps(summary, indent=2) + "\n")

    rows = []
    for s in selected:
        m = artifacts[s["key"]]["metrics"]
        rows.append(
            [
                s["id"],
                s["family"],
                report_number(s["score"]),
                report_number(m.get("rank_ic_mean")),
                report_number(m.get("rank_icir_ann")),
                report_number(m.get("ic_mean")),
                report_number(m.get("icir_ann")),
                report_number(m.get("long_short_mean")),
                report_number(m.get("turnover_top_decile")),
                s["key"],
                s["formula"],
            ]
        )
    paths["topk"] = out_dir / "topk.csv"
    write_csv(paths["topk"], TOPK_COLUMNS, rows)

    ic_rows = []
    ls_rows = []
    for s in selected:
        rep = artifacts[s["key"]]["report"]
        cum_rank = _cumulative(rep["rank_ic"]["values"])
        cum_ic = _cumulative(rep["ic"]["values"])
        for i, date in enumerate(rep["ic"]["dates"]):
            ic_rows.append(
                [
                    s["id"],
                    date,
                    report_number(rep["rank_ic"]["values"][i]),
                    report_number(cum_rank[i]),
                    report_number(rep["ic"]["values"][i]),
                    report_number(cum_ic[i]),
                ]
            )
        b = rep["buckets"]
        for date, v, c in zip(b["dates"], b["long_short"], _cumulative(b["long_short"])):
            ls_rows.append([s["id"], date, report_number(v), report_number(c)])
    paths["cumulative_ic"] = out_dir / "cumulative_ic.csv"
    write_csv(paths["cumulative_ic"], ("id", "date", "rank_ic", "cum_rank_ic", "ic", "cum_ic"), ic_rows)
    paths["cumulative_long_short"] = out_dir / "cumulative_long_short.csv"
    write_csv(paths["cumulative_long_short"], ("id", "date", "long_short", "cum_long_short"), ls_rows)

    bucket_rows = []
    if selected:
        means = artifacts[selected[0]["key"]]["report"]["buckets"]["bucket_means"]
        bucket_rows = [[selected[0]["id"], i + 1, report_number(v)] for i, v in enumerate(means)]
    paths["best_bucket_profile"] = out_dir / "best_bucket_profile.csv"
    write_csv(paths["best_bucket_profile"], ("id", "bucket", "mean_forward_return"), bucket_rows)

    pool: dict[str, int] = {f.value: 0 for f in Family}
    for key in store.factor_keys():
        pool[store.read_factor_artifact(key)["family"]] += 1
    top: dict[str, int] = {f.value: 0 for f in Family}
    for s in selected:
        top[s["family"]] += 1
    n_pool, n_top = sum(pool.values()), sum(top.values())
    fam_rows = [
        [
            fam,
            pool[fam],
            report_number(pool[fam] / n_pool) if n_pool else "0",
            top[fam],
            report_number(top[fam] / n_top) if n_top else "0",
        ]
        for fam in pool
    ]
    paths["family_composition"] = out_dir / "family_composition.csv"
    write_csv(paths["family_composition"], ("family", "pool_count", "pool_share", "topk_count", "topk_share"), fam_rows)
    return paths


# -- holdout ---------------------------------------------------------------------

HOLDOUT_COLUMNS = (
    "id",
    "family",
    "rank_ic",
    "rank_icir_ann",
    "rank_ic_t",
    "rank_ic_stars",
    "ic",
    "icir_ann",
    "ic_t",
    "ic_stars",
    "long_short",
    "long_short_t",
    "long_short_stars",
    "turnover",
    "status",
)


def check_disjoint(discovery_end: str, oos_calendar: Sequence[str]) -> None:
    if not oos_calendar:
        raise LeakageError("out-of-sample panel has no dates")
    if oos_calendar[0] <= discovery_end:
        raise LeakageError(
            f"out-of-sample window starts {oos_calendar[0]}, not after the discovery window "
            f"ending {discovery_end}; refusing to evaluate"
        )


def holdout_evaluate(
    run_dir: str | Path,
    oos_panel: Any,
    *,
    registry: OperatorRegistry | None = None,
    tag: str | None = None,
) -> dict:
    """Re-evaluate the frozen selection on a later, disjoint panel.

    Nothing under the run's selection, factors or reports is touched; output goes
    to ``holdout/<tag>/``.
    """
    from factor_forge.dsl import load_registry, parse_formula
    from factor_forge.evaluation import DegenerateFactor, assess
    from factor_forge.panel import forward_returns

    store = RunStore(run_dir)
    manifest = store.manifest
    discovery = manifest.get("discovery") or {}
    if "end" not in discovery:
        raise RunStoreError("manifest records no discovery calendar")
    check_disjoint(discovery["end"], oos_panel.calendar)
    selection = store.read_selection()
    if not selection or not selection.get("selected"):
        raise NoSelectionError(f"run {store.run_id} has no selection to validate")
    cfg = manifest.get("config", {})
    if registry is None and cfg.get("registry_path"):
        registry = load_registry(cfg["registry_path"])
    labels = forward_returns(oos_panel, int(cfg.get("horizon", 1)))
    rows = []
    for s in selection["selected"]:
        row: dict[str, Any] = {"id": s["id"], "family": s["family"], "key": s["key"], "formula": s["formula"]}
        try:
            rep = assess(
                parse_formula(s["formula"]),
                oos_panel,
                labels,
                registry=registry,
                min_assets=int(cfg.get("min_assets", 30)),
                buckets=int(cfg.get("buckets", 10)),
            )
        except DegenerateFactor as exc:
            row["status"] = f"degenerate: {exc}"
            rows.append(row)
            continue
        row.update(
            status="ok",
            rank_ic=rep.rank_ic_agg.mean,
            rank_icir_ann=rep.rank_ic_agg.ir_annual,
            rank_ic_t=rep.rank_ic_hac.t,
            rank_ic_p=rep.rank_ic_hac.p,
            rank_ic_stars=rep.rank_ic_hac.stars,
            ic=rep.ic_agg.mean,
            icir_ann=rep.ic_agg.ir_annual,
            ic_t=rep.ic_hac.t,
            ic_p=rep.ic_hac.p,
            ic_stars=rep.ic_hac.stars,
            long_short=rep.buckets.long_short_mean,
            long_short_t=rep.long_short_hac.t,
            long_short_p=rep.long_short_hac.p,
            long_short_stars=rep.long_short_hac.stars,
            turnover=rep.turnover.top_decile,
            dates=len(rep.ic.dates),
            hac_lag=rep.ic_hac.lag,
        )
        rows.append(row)
    tag = tag or f"{oos_panel.calendar[0]}_{oos_panel.calendar[-1]}"
    out_dir = store.path / "holdout" / tag
    out_dir.mkdir(parents=True, exist_ok=True)
    result = {
        "run_id": store.run_id,
        "discovery": discovery,
        "oos": {"start": oos_panel.calendar[0], "end": oos_panel.calendar[-1], "dates": len(oos_panel.calendar)},
        "rows": rows,
    }
    atomic_write_text(out_dir / "oos_report.json", dumps(result, indent=2) + "\n")

    def cell(row: Mapping[str, Any], col: str) -> Any:
        v = row.get(col, "")
        return report_number(v) if isinstance(v, float) else v

    write_csv(out_dir / "oos_table.csv", HOLDOUT_COLUMNS, [[cell(r, c) for c in HOLDOUT_COLUMNS] for r in rows])
    result["path"] = str(out_dir)
    return result


def format_holdout_table(result: Mapping[str, Any]) -> str:
    def num(v: Any, stars: str = "") -> str:
        if v is None or (isinstance(v, float) and not math.isfinite(v)):
            return "-"
        return f"{v:.4f}{stars}"

    width = max([len("Factor")] + [len(r["id"]) for r in result["rows"]]) + 2
    header = (
        f"{'Factor':<{width}}{'RankIC':>9}{'RankICIR':>10}{'t(HAC)':>12}{'IC':>9}{'ICIR':>9}"
        f"{'t(HAC)':>12}{'L-S':>10}{'t(HAC)':>12}{'Turnover':>10}"
    )
    lines = [f"OOS {result['oos']['start']} .. {result['oos']['end']} ({result['oos']['dates']} dates)", header]
    for r in result["rows"]:
        if r.get("status") != "ok":
            lines.append(f"{r['id']:<{width}}{r.get('status', '')}")
            continue
        lines.append(
            f"{r['id']:<{width}}{num(r['rank_ic']):>9}{num(r['rank_icir_ann']):>10}"
            f"{num(r['rank_ic_t'], r['rank_ic_stars']):>12}{num(r['ic']):>9}{num(r['icir_ann']):>9}"
            f"{num(r['ic_t'], r['ic_stars']):>12}{num(r['long_short']):>10}"
            f"{num(r['long_short_t'], r['long_short_stars']):>12}{num(r['turnover']):>10}"
        )
    lines.append("* p<0.05, ** p<0.01, *** p<0.001 (HAC t-statistics)")
    return "\n".join(lines)


__all__ = [
    "ArtifactCollisionError",
    "LeakageError",
    "NoSelectionError",
    "ReportError",
    "RunStore",
    "RunStoreError",
    "check_disjoint",
    "dumps",
    "emit_report",
    "eval_report_from_dict",
    "eval_report_to_dict",
    "factor_artifact",
    "format_holdout_table",
    "format_round_table",
    "holdout_evaluate",
    "jsonable",
    "report_number",
    "summarize_rounds",
]
