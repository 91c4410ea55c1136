"""Curated reference corpus and the two retrieval channels.

Corpus files are JSON lines with keys ``id``, ``channel`` (``positive`` or
``negative``), ``family``, ``formula``, ``note`` and optional ``weight``.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from factor_forge.dsl import (
    THEMES,
    Family,
    FormulaAst,
    FormulaSyntaxError,
    OperatorRegistry,
    default_registry,
    parse_family,
    parse_formula,
    validate,
)

log = logging.getLogger(__name__)

CHANNELS = ("positive", "negative")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    channel: str
    family: Family
    formula: str
    note: str = ""
    weight: float = 1.0


@dataclass(frozen=True)
class Corpus:
    entries: tuple[CorpusEntry, ...]
    by_id: Mapping[str, CorpusEntry] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        table: dict[str, CorpusEntry] = {}
        for e in self.entries:
            if e.id in table:
                raise CorpusError(f"duplicate corpus identifier {e.id!r}")
            table[e.id] = e
        object.__setattr__(self, "by_id", table)

    def channel(self, name: str) -> list[CorpusEntry]:
        return [e for e in self.entries if e.channel == name]

    def family(self, fam: Family, channel: str | None = None) -> list[CorpusEntry]:
        return [e for e in self.entries if e.family is fam and (channel is None or e.channel == channel)]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class CoverageState:
    run_counts: dict[Family, int] = field(default_factory=dict)
    selected_counts: dict[Family, int] = field(default_factory=dict)

    def count(self, fam: Family) -> int:
        return self.run_counts.get(fam, 0)

    def to_dict(self) -> dict:
        return {
            "run_counts": {f.value: self.run_counts.get(f, 0) for f in Family},
            "selected_counts": {f.value: self.selected_counts.get(f, 0) for f in Family},
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> CoverageState:
        return cls(
            run_counts={Family(k): int(v) for k, v in raw.get("run_counts", {}).items() if v},
            selected_counts={Family(k): int(v) for k, v in raw.get("selected_counts", {}).items() if v},
        )

    def explored(self) -> tuple[list[Family], list[Family]]:
        """(over-explored, under-explored) themes relative to the mean run count."""
        counts = [self.count(f) for f in THEMES]
        mean = sum(counts) / len(counts)
        over = [f for f, c in zip(THEMES, counts) if c > mean]
        under = [f for f, c in zip(THEMES, counts) if c < mean]
        return over, under


def _entry_from_record(raw: Mapping, lineno: int) -> CorpusEntry:
    for key in ("id", "channel", "family", "formula"):
        if key not in raw:
            raise CorpusError(f"corpus line {lineno}: missing {key!r}")
    channel = str(raw["channel"])
    if channel not in CHANNELS:
        raise CorpusError(f"corpus line {lineno}: unknown channel {channel!r}")
    fam = parse_family(raw["family"])
    if fam is None:
        log.warning("corpus entry %s: unknown family %r mapped to other", raw["id"], raw["family"])
        fam = Family.OTHER
    weight = float(raw.get("weight", 1.0))
    if weight < 0:
        raise CorpusError(f"corpus line {lineno}: negative weight")
    return CorpusEntry(
        id=str(raw["id"]),
        channel=channel,
        family=fam,
        formula=str(raw["formula"]),
        note=str(raw.get("note", "")),
        weight=weight,
    )


def load_corpus(path: str | Path | None = None) -> Corpus:
    """Load a corpus file; ``None`` loads the bundled starter corpus."""
    if path is None:
        text = resources.files("factor_forge").joinpath("data/corpus.jsonl").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"corpus line {lineno}: {exc}") from exc
        if not isinstance(raw, dict):
            raise CorpusError(f"corpus line {lineno}: expected an object")
        entries.append(_entry_from_record(raw, lineno))
    return Corpus(tuple(entries))


def retrieve_positive(corpus: Corpus, coverage: CoverageState, n: int, seed: int = 0) -> list[CorpusEntry]:
    """Positive references, least-covered families first, round-robin across families.

    Within a family, entry order is a seeded shuffle so repeated rounds can vary
    the examples while staying reproducible.
    """
    if n <= 0:
        return []
    rng = random.Random(seed)
    order = list(Family)
    families = sorted(
        {e.family for e in corpus.channel("positive")},
        key=lambda f: (coverage.count(f), order.index(f)),
    )
    queues = []
    for fam in families:
        items = sorted(corpus.family(fam, "positive"), key=lambda e: e.id)
        rng.shuffle(items)
        queues.append(items)
    out: list[CorpusEntry] = []
    while len(out) < n and any(queues):
        for q in queues:
            if q and len(out) < n:
                out.append(q.pop(0))
    return out


def retrieve_negative(corpus: Corpus, n: int) -> list[CorpusEntry]:
    if n <= 0:
        return []
    return sorted(corpus.channel("negative"), key=lambda e: (-e.weight, e.id))[:n]


def negative_templates(corpus: Corpus, registry: OperatorRegistry | None = None) -> list[FormulaAst]:
    """Parsed negative-channel formulas; placeholder templates that fail the sandbox are skipped."""
    registry = registry or default_registry()
    out = []
    for e in retrieve_negative(corpus, len(corpus)):
        try:
            ast = parse_formula(e.formula)
        except FormulaSyntaxError as exc:
            log.info("negative template %s skipped: %s", e.id, exc)
            continue
        report = validate(ast, registry)
        if not report.accepted:
            log.info("negative template %s skipped: %s", e.id, "; ".join(report.reasons))
            continue
        out.append(ast)
    return out
