"""Prompt bundles (static operator prefix plus per-round dynamic suffix) and round feedback."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from factor_forge.corpus import Corpus, CoverageState, retrieve_negative, retrieve_positive
from factor_forge.dsl import THEMES, Family, OperatorRegistry

BATCHES = ("primary", "feedback")

DIVERSITY_REQUIREMENT = (
    "Diversity requirement: spread the batch across all six factor families: "
    + ", ".join(f.value for f in THEMES)
    + ". Do not concentrate on a single family."
)

OUTPUT_CONTRACT = (
    "Output format: reply with exactly one fenced code block. Put one formula per line. "
    "A line may end with an annotation of the form 'family: <name>' using one of the family names above. "
    "Write nothing else inside the block."
)


def _signature(spec: Any) -> str:
    data = [i for i in range(spec.arity) if i not in spec.window_positions]
    names = []
    for i in range(spec.arity):
        if i in spec.window_positions:
            names.append("w")
        else:
            names.append("x" if len(data) == 1 else f"x{data.index(i) + 1}")
    return f"{spec.name}({', '.join(names)})"


def operator_docs(registry: OperatorRegistry) -> str:
    lines = [
        "You write cross-sectional equity alpha factors in a restricted formula language.",
        "",
        "Variables: " + ", ".join(sorted(registry.fields)),
        "Arithmetic: + - * / and unary minus; comparisons: > < >= <= == != (yield 1 or 0).",
        "Window and lag arguments must be positive integer literals.",
        "Operators:",
    ]
    for spec in sorted(registry, key=lambda s: s.name):
        lines.append(f"  {_signature(spec)}: {spec.doc}" if spec.doc else f"  {_signature(spec)}")
    lines += ["", OUTPUT_CONTRACT]
    return "\n".join(lines)


@dataclass(frozen=True)
class RoundFeedback:
    round_index: int
    top: tuple[tuple[str, float, str], ...] = ()
    errors: Mapping[str, int] = field(default_factory=dict)
    top_families: tuple[Family, ...] = ()
    over_explored: tuple[Family, ...] = ()
    under_explored: tuple[Family, ...] = ()
    positive_ids: tuple[str, ...] = ()
    negative_ids: tuple[str, ...] = ()
    usage: Mapping[str, Any] = field(default_factory=dict)

    def digest(self) -> str:
        """Prompt text. Usage metadata (timestamps, token counts) is deliberately left out."""
        lines = [f"Feedback from round {self.round_index}:"]
        if self.top:
            lines.append("Best formulas so far (score, family):")
            for i, (formula, score, fam) in enumerate(self.top, 1):
                lines.append(f"  {i}. {formula}  ({score:.4f}, {fam})")
        else:
            lines.append("No formula was accepted yet.")
        if self.errors:
            parts = ", ".join(f"{name} {count}" for name, count in sorted(self.errors.items()))
            lines.append(f"Errors: {parts}. Duplicates of earlier formulas are wasted; propose new structures.")
        if self.top_families:
            lines.append("Top families: " + ", ".join(f.value for f in self.top_families))
        if self.over_explored:
            lines.append("Over-explored families (de-emphasise): " + ", ".join(f.value for f in self.over_explored))
        if self.under_explored:
            lines.append("Under-explored families (prioritise): " + ", ".join(f.value for f in self.under_explored))
        return "\n".join(lines)

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.round_index,
            "top": [{"formula": f, "score": s, "family": fam} for f, s, fam in self.top],
            "errors": dict(sorted(self.errors.items())),
            "top_families": [f.value for f in self.top_families],
            "over_explored": [f.value for f in self.over_explored],
            "under_explored": [f.value for f in self.under_explored],
            "positive_ids": list(self.positive_ids),
            "negative_ids": list(self.negative_ids),
            "usage": dict(self.usage),
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> RoundFeedback:
        return cls(
            round_index=int(raw["round"]),
            top=tuple((t["formula"], float(t["score"]), t["family"]) for t in raw.get("top", [])),
            errors={k: int(v) for k, v in raw.get("errors", {}).items()},
            top_families=tuple(Family(f) for f in raw.get("top_families", [])),
            over_explored=tuple(Family(f) for f in raw.get("over_explored", [])),
            under_explored=tuple(Family(f) for f in raw.get("under_explored", [])),
            positive_ids=tuple(raw.get("positive_ids", [])),
            negative_ids=tuple(raw.get("negative_ids", [])),
            usage=dict(raw.get("usage", {})),
        )


def compile_feedback(
    round_index: int,
    top: Sequence[Any],
    errors: Mapping[str, int],
    coverage: CoverageState,
    positive_ids: Sequence[str] = (),
    negative_ids: Sequence[str] = (),
    usage: Mapping[str, Any] | None = None,
) -> RoundFeedback:
    """``top`` holds scored candidates (anything with formula, score and family)."""
    over, under = coverage.explored()
    fams: list[Family] = []
    for c in top:
        if c.family not in fams:
            fams.append(c.family)
    return RoundFeedback(
        round_index=round_index,
        top=tuple((c.formula, float(c.score), Family(c.family).value) for c in top),
        errors={k: v for k, v in errors.items() if v},
        top_families=tuple(fams),
        over_explored=tuple(over),
        under_explored=tuple(under),
        positive_ids=tuple(positive_ids),
        negative_ids=tuple(negative_ids),
        usage=dict(usage or {}),
    )


@dataclass(frozen=True)
class PromptBundle:
    static_prefix: str
    dynamic_suffix: str
    round_index: int
    batch_size: int
    batch: str = "primary"
    positive_ids: tuple[str, ...] = ()
    negative_ids: tuple[str, ...] = ()
    under_explored: tuple[Family, ...] = ()
    examples: tuple[str, ...] = ()

    @property
    def reference_ids(self) -> tuple[str, ...]:
        return self.positive_ids + self.negative_ids

    @property
    def has_feedback(self) -> bool:
        return "Feedback from round" in self.dynamic_suffix

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for part in (self.static_prefix, self.dynamic_suffix, str(self.round_index), self.batch, str(self.batch_size)):
            h.update(part.encode("utf-8"))
            h.update(b"\0")
        return h.hexdigest()

    def to_dict(self) -> dict[str, Any]:
        return {
            "static_prefix": self.static_prefix,
            "dynamic_suffix": self.dynamic_suffix,
            "metadata": {
                "round": self.round_index,
                "batch": self.batch,
                "batch_size": self.batch_size,
                "positive_ids": list(self.positive_ids),
                "negative_ids": list(self.negative_ids),
                "under_explored": [f.value for f in self.under_explored],
                "examples": list(self.examples),
            },
        }


def build_prompt(
    round_index: int,
    batch_size: int,
    feedback: RoundFeedback | None,
    corpus: Corpus | None,
    coverage: CoverageState,
    registry: OperatorRegistry,
    *,
    rag: bool = True,
    positive_refs: int = 4,
    negative_refs: int = 4,
    seed: int = 0,
    batch: str = "primary",
) -> PromptBundle:
    """Assemble the prompt for one generation batch.

    The primary batch of round 1 carries no feedback digest. The feedback batch
    of any round carries the intra-round digest built from the primary batch.
    """
    if round_index < 1:
        raise ValueError("round index starts at 1")
    if batch not in BATCHES:
        raise ValueError(f"batch must be one of {BATCHES}")
    if round_index == 1 and batch == "primary":
        feedback = None
    parts = [
        f"Propose {batch_size} new alpha factor formulas.",
        "Each formula should be economically motivated, use only the listed operators and variables, "
        "and differ structurally from the references and from earlier proposals.",
        DIVERSITY_REQUIREMENT,
    ]
    examples: list[str] = []
    if feedback is not None:
        parts.append(feedback.digest())
        examples.extend(f for f, _, _ in feedback.top)
    positives, negatives = [], []
    if rag and corpus is not None:
        seed_text = f"{seed}:{round_index}:{batch}".encode()
        ref_seed = int.from_bytes(hashlib.sha256(seed_text).digest()[:8], "big")
        positives = retrieve_positive(corpus, coverage, positive_refs, seed=ref_seed)
        negatives = retrieve_negative(corpus, negative_refs)
        if positives:
            parts.append("Reference factors (use as inspiration, do not copy):")
            parts += [f"  [{e.id}] {e.formula}  ({e.family.value}; {e.note})" for e in positives]
            examples.extend(e.formula for e in positives)
        if negatives:
            parts.append("Crowded patterns to avoid (and near variants of them):")
            parts += [f"  [{e.id}] {e.formula}  ({e.note})" for e in negatives]
    under = feedback.under_explored if feedback is not None else ()
    return PromptBundle(
        static_prefix=operator_docs(registry),
        dynamic_suffix="\n".join(parts),
        round_index=round_index,
        batch_size=batch_size,
        batch=batch,
        positive_ids=tuple(e.id for e in positives),
        negative_ids=tuple(e.id for e in negatives),
        under_explored=tuple(under),
        examples=tuple(examples),
    )
