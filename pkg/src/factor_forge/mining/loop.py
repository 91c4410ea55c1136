"""Round orchestration: generate, sandbox, evaluate, score, persist, checkpoint."""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Sequence

from factor_forge import __version__
from factor_forge import evaluation
from factor_forge.config import RunConfig
from factor_forge.corpus import Corpus, CoverageState, load_corpus, negative_templates
from factor_forge.dsl import (
    Family,
    FormulaAst,
    FormulaSyntaxError,
    Layer,
    OperatorRegistry,
    SandboxPolicy,
    canonicalize,
    classify_family,
    default_registry,
    load_registry,
    parse_formula,
    validate,
)
from factor_forge.evaluation import EvalReport
from factor_forge.mining.generators import (
    GeneratorExhausted,
    GeneratorInterface,
    HttpGenerator,
    MockGenerator,
    RawCandidate,
    generate_with_retry,
)
from factor_forge.mining.prompts import PromptBundle, RoundFeedback, build_prompt, compile_feedback
from factor_forge.panel import LabelMatrix, Panel, forward_returns, load_panel
from factor_forge.scoring import ScoreConfig, ScoredCandidate, score_candidate, select_top_k
from factor_forge.store import RunStore, emit_report, factor_artifact, summarize_rounds

log = logging.getLogger(__name__)

MAX_RECORDED_TEXT = 2000


class Outcome(str, Enum):
    OK = "ok"
    PARSE_ERROR = "parse_error"
    REJECTED = "rejected"
    DUPLICATE = "duplicate"
    EVALUATION_FAILURE = "evaluation_failure"


ERROR_OUTCOMES = frozenset(o for o in Outcome if o is not Outcome.OK)


@dataclass(frozen=True)
class CandidateOutcome:
    status: Outcome
    text: str
    round_index: int = 0
    batch: str = "primary"
    declared_family: str | None = None
    family: Family | None = None
    key: str | None = None
    formula: str | None = None
    layer: Layer | None = None
    detail: str = ""
    offset: int | None = None
    candidate: ScoredCandidate | None = field(default=None, repr=False)
    report: EvalReport | None = field(default=None, repr=False)

    @property
    def is_error(self) -> bool:
        return self.status in ERROR_OUTCOMES

    def to_record(self) -> dict[str, Any]:
        text = self.text if len(self.text) <= MAX_RECORDED_TEXT else self.text[:MAX_RECORDED_TEXT] + "..."
        rec: dict[str, Any] = {
            "type": "candidate",
            "round": self.round_index,
            "batch": self.batch,
            "status": self.status.value,
            "text": text,
            "declared_family": self.declared_family,
            "family": self.family.value if self.family else None,
            "key": self.key,
            "formula": self.formula,
            "layer": self.layer.value if self.layer else None,
            "detail": self.detail,
            "offset": self.offset,
        }
        if self.candidate is not None:
            rec["score"] = {"base": self.candidate.base, "crowded": self.candidate.crowded, "score": self.candidate.score}
        return rec


@dataclass
class RunState:
    panel: Panel
    labels: LabelMatrix
    registry: OperatorRegistry
    score_config: ScoreConfig
    negatives: Sequence[FormulaAst] = ()
    policy: SandboxPolicy = field(default_factory=SandboxPolicy)
    min_assets: int = 30
    buckets: int = 10
    seen_keys: set[str] = field(default_factory=set)
    coverage: CoverageState = field(default_factory=CoverageState)
    ok: list[ScoredCandidate] = field(default_factory=list)

    def record_ok(self, cand: ScoredCandidate) -> None:
        self.ok.append(cand)
        self.coverage.run_counts[cand.family] = self.coverage.run_counts.get(cand.family, 0) + 1


@dataclass(frozen=True)
class RoundResult:
    round_index: int
    candidates: int
    evaluated: int
    ok: int
    errors: int
    best_score: float | None
    outcomes: tuple[CandidateOutcome, ...]
    feedback: RoundFeedback
    error_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.round_index,
            "counts": {"candidates": self.candidates, "evaluated": self.evaluated, "ok": self.ok, "errors": self.errors},
            "best_score": self.best_score,
            "outcomes": {o.value: sum(1 for x in self.outcomes if x.status is o) for o in Outcome},
            "batches": {
                b: sum(1 for x in self.outcomes if x.batch == b) for b in ("primary", "feedback")
            },
            "feedback": self.feedback.to_dict(),
        }


def _as_text(raw: Any) -> str:
    if isinstance(raw, (bytes, bytearray)):
        return bytes(raw).decode("utf-8", errors="replace")
    return raw if isinstance(raw, str) else str(raw)


def process_candidate(
    text: Any,
    declared_family: str | None,
    state: RunState,
    round_index: int = 0,
    batch: str = "primary",
) -> CandidateOutcome:
    """Parse, validate, de-duplicate, evaluate and score one untrusted candidate.

    Every path ends in exactly one outcome class; no stage failure propagates.
    """
    text = _as_text(text)
    base = {"text": text, "round_index": round_index, "batch": batch, "declared_family": declared_family}
    try:
        ast = parse_formula(text)
    except FormulaSyntaxError as exc:
        return CandidateOutcome(Outcome.PARSE_ERROR, detail=exc.message, offset=exc.offset, **base)
    except Exception as exc:  # the parser is total by design; this is a last-resort guard
        log.exception("parser failure")
        return CandidateOutcome(Outcome.PARSE_ERROR, detail=f"parser failure: {exc!r}", **base)

    try:
        verdict = validate(ast, state.registry, state.policy)
    except Exception as exc:  # validators are total by design; last-resort guard
        log.exception("validator failure")
        return CandidateOutcome(Outcome.REJECTED, detail=f"validator failure: {exc!r}", **base)
    if not verdict.accepted:
        return CandidateOutcome(
            Outcome.REJECTED, layer=verdict.failed_layer, detail="; ".join(verdict.reasons), formula=str(ast), **base
        )

    key = canonicalize(ast)
    formula = str(ast)
    if key in state.seen_keys:
        return CandidateOutcome(Outcome.DUPLICATE, key=key, formula=formula, detail="canonical key seen earlier in run", **base)
    state.seen_keys.add(key)
    family = None
    try:
        family = classify_family(ast, declared_family)
        report = evaluation.assess(
            ast,
            state.panel,
            state.labels,
            registry=state.registry,
            min_assets=state.min_assets,
            buckets=state.buckets,
        )
        cand = score_candidate(
            formula, key, family, ast, report.metric_vector(), state.negatives, state.score_config, round_index
        )
    except Exception as exc:
        return CandidateOutcome(
            Outcome.EVALUATION_FAILURE, key=key, formula=formula, family=family, detail=f"{type(exc).__name__}: {exc}", **base
        )
    return CandidateOutcome(Outcome.OK, key=key, formula=formula, family=family, candidate=cand, report=report, **base)


def _persist(store: RunStore | None, outcome: CandidateOutcome) -> None:
    if store is None:
        return
    if outcome.status is Outcome.OK:
        store.write_factor_artifact(factor_artifact(outcome.candidate, outcome.report))
    store.append_record(outcome.to_record())


def _run_batch(
    bundle: PromptBundle,
    generator: GeneratorInterface,
    state: RunState,
    store: RunStore | None,
    sleep: Callable[[float], None],
) -> tuple[list[CandidateOutcome], dict[str, Any]]:
    raw: list[RawCandidate] = generate_with_retry(generator, bundle, sleep=sleep)
    usage = {}
    if generator.last_exchange:
        usage = {k: v for k, v in generator.last_exchange.items() if k in ("model", "usage", "started", "finished")}
    if store is not None:
        store.write_prompt(bundle.round_index, bundle.batch, {"bundle": bundle.to_dict(), "exchange": generator.last_exchange})
    if not raw:
        log.warning("round %d %s batch: generator returned no candidates", bundle.round_index, bundle.batch)
    outcomes = []
    for item in raw:
        outcome = process_candidate(item.text, item.family, state, bundle.round_index, bundle.batch)
        if outcome.status is Outcome.OK:
            state.record_ok(outcome.candidate)
        _persist(store, outcome)
        outcomes.append(outcome)
    return outcomes, usage


def _error_counts(outcomes: Sequence[CandidateOutcome]) -> dict[str, int]:
    counts = Counter(o.status.value for o in outcomes if o.is_error)
    return {k: counts[k] for k in sorted(counts)}


def _provisional(state: RunState, k: int) -> list[ScoredCandidate]:
    if not state.ok:
        return []
    top = select_top_k(state.ok, k, state.score_config)
    state.coverage.selected_counts = dict(Counter(c.family for c in top))
    return top


def run_round(
    round_index: int,
    config: RunConfig,
    state: RunState,
    generator: GeneratorInterface,
    corpus: Corpus | None,
    previous: RoundFeedback | None = None,
    store: RunStore | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> RoundResult:
    """Primary batch, then (if enabled) a feedback batch steered by the primary outcomes."""
    started = time.time()
    prompt_args = dict(
        corpus=corpus,
        registry=state.registry,
        rag=config.rag,
        positive_refs=config.positive_refs,
        negative_refs=config.negative_refs,
        seed=config.seed,
    )
    bundle = build_prompt(round_index, config.batch_size, previous, coverage=state.coverage, **prompt_args)
    primary, usage_primary = _run_batch(bundle, generator, state, store, sleep)
    outcomes = list(primary)
    usage: dict[str, Any] = {"primary": usage_primary}
    pos_ids, neg_ids = list(bundle.positive_ids), list(bundle.negative_ids)
    if config.feedback:
        top = _provisional(state, config.top_k)
        intra = compile_feedback(round_index, top, _error_counts(primary), state.coverage, bundle.positive_ids, bundle.negative_ids)
        fb_bundle = build_prompt(round_index, config.batch_size, intra, coverage=state.coverage, batch="feedback", **prompt_args)
        extra, usage["feedback"] = _run_batch(fb_bundle, generator, state, store, sleep)
        outcomes.extend(extra)
        pos_ids += [i for i in fb_bundle.positive_ids if i not in pos_ids]
        neg_ids += [i for i in fb_bundle.negative_ids if i not in neg_ids]

    counts = Counter(o.status for o in outcomes)
    ok_here = [o.candidate for o in outcomes if o.status is Outcome.OK]
    best = max((c.score for c in ok_here), default=None)
    top = _provisional(state, config.top_k)
    usage.update(started=started, finished=time.time(), model=generator.model_id)
    feedback = compile_feedback(round_index, top, _error_counts(outcomes), state.coverage, pos_ids, neg_ids, usage)
    result = RoundResult(
        round_index=round_index,
        candidates=len(primary),
        evaluated=counts[Outcome.OK] + counts[Outcome.EVALUATION_FAILURE],
        ok=counts[Outcome.OK],
        errors=sum(counts[o] for o in ERROR_OUTCOMES),
        best_score=best,
        outcomes=tuple(outcomes),
        feedback=feedback,
        error_counts=_error_counts(outcomes),
    )
    if store is not None:
        store.write_round(round_index, result.to_dict())
        store.append_record({"type": "round", **result.to_dict()})
    return result


# -- whole runs ------------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    run_dir: Path
    rounds: list[dict[str, Any]]
    totals: dict[str, Any]
    selection: list[dict[str, Any]]
    completed: bool


def make_generator(config: RunConfig, registry: OperatorRegistry) -> GeneratorInterface:
    if config.generator == "mock":
        return MockGenerator(
            seed=config.seed,
            malformed_rate=config.malformed_rate,
            duplicate_rate=config.duplicate_rate,
            registry=registry,
        )
    return HttpGenerator(config.endpoint, config.model, timeout=config.timeout)


def load_run_registry(config: RunConfig) -> OperatorRegistry:
    return load_registry(config.registry_path) if config.registry_path else default_registry()


def load_run_panel(config: RunConfig) -> Panel:
    if not config.data_path:
        from factor_forge.panel import DataError

        raise DataError("no data path configured")
    return load_panel(config.data_path, config.universe_path, config.start, config.end)


def _build_state(config: RunConfig, panel: Panel, registry: OperatorRegistry, corpus: Corpus) -> RunState:
    return RunState(
        panel=panel,
        labels=forward_returns(panel, config.horizon),
        registry=registry,
        score_config=config.score_config(),
        negatives=negative_templates(corpus, registry),
        policy=SandboxPolicy(max_depth=config.max_depth, max_nodes=config.max_nodes),
        min_assets=config.min_assets,
        buckets=config.buckets,
    )


def _checkpoint(store: RunStore, round_index: int, state: RunState, feedback: RoundFeedback | None) -> None:
    store.write_checkpoint(
        {
            "completed_rounds": round_index,
            "seen_keys": sorted(state.seen_keys),
            "coverage": state.coverage.to_dict(),
            "ok_keys": [c.key for c in state.ok],
            "feedback": feedback.to_dict() if feedback else None,
            "records_position": store.position,
        }
    )


def _candidate_from_artifact(art: dict[str, Any]) -> ScoredCandidate:
    return ScoredCandidate(
        formula=art["formula"],
        key=art["key"],
        family=Family(art["family"]),
        ast=parse_formula(art["formula"]),
        metrics={k: (float("nan") if v is None else float(v)) for k, v in art["metrics"].items()},
        base=float(art["score"]["base"]),
        crowded=float(art["score"]["crowded"]),
        round_index=int(art["round"]),
    )


FACTOR_LABELS = {
    Family.PRICE_TREND: "Trend",
    Family.MEAN_REVERSION: "Reversion",
    Family.VOLATILITY: "Volatility",
    Family.RANGE: "Range",
    Family.LIQUIDITY_VOLUME: "Liquidity",
    Family.PRICE_VOLUME: "PriceVolume",
    Family.OTHER: "Other",
}


def _selection_ids(selected: Sequence[ScoredCandidate]) -> list[dict[str, Any]]:
    seen: Counter = Counter()
    out = []
    for c in selected:
        seen[c.family] += 1
        out.append(
            {
                "id": f"{FACTOR_LABELS[c.family]}-{seen[c.family]}",
                "key": c.key,
                "formula": c.formula,
                "family": c.family.value,
                "round": c.round_index,
                "score": c.adjusted,
                "base": c.base,
                "crowded": c.crowded,
                "similar": c.similar,
                "family_penalty": c.family_penalty,
                "novelty": c.novelty,
            }
        )
    return out


def _finish(config: RunConfig, state: RunState, store: RunStore) -> list[dict[str, Any]]:
    selected = select_top_k(state.ok, config.top_k, state.score_config) if state.ok else []
    entries = _selection_ids(selected)
    store.write_selection({"k": config.top_k, "family_cap": config.family_cap, "selected": entries})
    emit_report(store.path)
    return entries


def _drive(
    config: RunConfig,
    state: RunState,
    store: RunStore,
    generator: GeneratorInterface,
    corpus: Corpus,
    first_round: int,
    feedback: RoundFeedback | None,
    stop_after: int | None,
    sleep: Callable[[float], None],
    on_round: Callable[[RoundResult], None] | None,
) -> RunSummary:
    last = config.rounds if stop_after is None else min(config.rounds, stop_after)
    for r in range(first_round, last + 1):
        try:
            result = run_round(r, config, state, generator, corpus if config.rag else None, feedback, store, sleep)
        except GeneratorExhausted as exc:
            store.append_record({"type": "error", "round": r, "kind": "generator_exhausted", "detail": str(exc)})
            raise
        feedback = result.feedback
        _checkpoint(store, r, state, feedback)
        if on_round is not None:
            on_round(result)
    completed = last == config.rounds
    selection = _finish(config, state, store) if completed else []
    summary = summarize_rounds(store.read_rounds())
    return RunSummary(store.path, summary["rounds"], summary["totals"], selection, completed)


def run_mining(
    config: RunConfig,
    *,
    panel: Panel | None = None,
    generator: GeneratorInterface | None = None,
    corpus: Corpus | None = None,
    registry: OperatorRegistry | None = None,
    stop_after: int | None = None,
    sleep: Callable[[float], None] = time.sleep,
    on_round: Callable[[RoundResult], None] | None = None,
) -> RunSummary:
    """Execute all configured rounds into a fresh run directory and freeze the final top-k.

    ``stop_after`` ends the run early after that many rounds, leaving a resumable checkpoint.
    """
    config.validate()
    registry = registry or load_run_registry(config)
    panel = panel if panel is not None else load_run_panel(config)
    corpus = corpus or load_corpus(config.corpus_path)
    generator = generator or make_generator(config, registry)
    state = _build_state(config, panel, registry, corpus)
    manifest = {
        "config": config.to_dict(),
        "score_config": state.score_config.to_dict(),
        "panel_fingerprint": panel.fingerprint(),
        "code_version": __version__,
        "seeds": {"run": config.seed},
        "discovery": {
            "start": panel.calendar[0],
            "end": panel.calendar[-1],
            "dates": len(panel.calendar),
            "assets": len(panel.assets),
        },
        "generator": {"kind": config.generator, "model": generator.model_id},
    }
    store = RunStore.init_run(config.output_root, manifest)
    log.info("run directory %s", store.path)
    return _drive(config, state, store, generator, corpus, 1, None, stop_after, sleep, on_round)


def resume_run(
    run_dir: str | Path,
    *,
    panel: Panel | None = None,
    generator: GeneratorInterface | None = None,
    corpus: Corpus | None = None,
    registry: OperatorRegistry | None = None,
    stop_after: int | None = None,
    sleep: Callable[[float], None] = time.sleep,
    on_round: Callable[[RoundResult], None] | None = None,
) -> RunSummary:
    """Continue a run from its last checkpoint. Output of a half-finished round is set aside and the round re-runs."""
    store = RunStore(run_dir)
    manifest = store.manifest
    config = RunConfig.from_dict(manifest["config"]).validate()
    registry = registry or load_run_registry(config)
    panel = panel if panel is not None else load_run_panel(config)
    if panel.fingerprint() != manifest["panel_fingerprint"]:
        from factor_forge.panel import DataError

        raise DataError("panel does not match the run's recorded fingerprint")
    corpus = corpus or load_corpus(config.corpus_path)
    generator = generator or make_generator(config, registry)
    state = _build_state(config, panel, registry, corpus)
    checkpoint = store.read_checkpoint()
    done, feedback = 0, None
    if checkpoint:
        done = int(checkpoint["completed_rounds"])
        state.seen_keys = set(checkpoint["seen_keys"])
        state.coverage = CoverageState.from_dict(checkpoint["coverage"])
        state.ok = [_candidate_from_artifact(store.read_factor_artifact(k)) for k in checkpoint["ok_keys"]]
        feedback = RoundFeedback.from_dict(checkpoint["feedback"]) if checkpoint.get("feedback") else None
    moved = store.quarantine_factors(c.key for c in state.ok)
    if store.position > (checkpoint or {}).get("records_position", 0):
        store.append_record(
            {
                "type": "error",
                "kind": "resume",
                "round": done + 1,
                "detail": "records after the last checkpoint belong to an interrupted round and are superseded",
                "superseded_after": (checkpoint or {}).get("records_position", 0),
                "orphaned_artifacts": moved,
            }
        )
    for path in (store.path / "rounds").glob("round-*.json"):
        n = int(path.stem.split("-")[1])
        if n > done:
            path.unlink()
    return _drive(config, state, store, generator, corpus, done + 1, feedback, stop_after, sleep, on_round)
