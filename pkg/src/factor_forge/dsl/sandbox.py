"""Three-layer validation: structure, complexity, semantics.

Each layer only inspects its own concern, so a tree that violates exactly one
layer is accepted by the other two regardless of call order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from factor_forge.dsl.nodes import Call, FormulaAst, Num, Var, kind_of, walk
from factor_forge.dsl.registry import MAX_WINDOW, OperatorRegistry

WHITELIST = frozenset({"call", "var", "num", "binop", "neg", "compare"})


class Layer(str, Enum):
    STRUCTURAL = "structural"
    COMPLEXITY = "complexity"
    SEMANTIC = "semantic"


@dataclass(frozen=True)
class SandboxPolicy:
    max_depth: int = 12
    max_nodes: int = 64
    allowed_kinds: frozenset[str] = WHITELIST
    max_window: int = MAX_WINDOW


@dataclass(frozen=True)
class ValidationReport:
    accepted: bool
    failed_layer: Layer | None = None
    reasons: tuple[str, ...] = field(default_factory=tuple)

    @property
    def verdict(self) -> str:
        return "accepted" if self.accepted else "rejected"


ACCEPTED = ValidationReport(True)


def _reject(layer: Layer, reasons: list[str]) -> ValidationReport:
    return ValidationReport(False, layer, tuple(reasons))


def validate_structure(ast: FormulaAst, policy: SandboxPolicy = SandboxPolicy()) -> ValidationReport:
    bad = sorted({kind_of(n) for n in walk(ast.root)} - policy.allowed_kinds)
    if bad:
        return _reject(Layer.STRUCTURAL, [f"node kind {k!r} is not allowed" for k in bad])
    return ACCEPTED


def validate_complexity(ast: FormulaAst, policy: SandboxPolicy = SandboxPolicy()) -> ValidationReport:
    reasons = []
    if ast.depth > policy.max_depth:
        reasons.append(f"depth {ast.depth} exceeds limit {policy.max_depth}")
    if ast.size > policy.max_nodes:
        reasons.append(f"node count {ast.size} exceeds limit {policy.max_nodes}")
    return _reject(Layer.COMPLEXITY, reasons) if reasons else ACCEPTED


def validate_semantics(
    ast: FormulaAst, registry: OperatorRegistry, policy: SandboxPolicy = SandboxPolicy()
) -> ValidationReport:
    reasons: list[str] = []
    for node in walk(ast.root):
        if isinstance(node, Var):
            if node.name not in registry.fields:
                reasons.append(f"unknown variable {node.name}")
        elif isinstance(node, Call):
            spec = registry.lookup(node.name)
            if spec is None:
                reasons.append(f"unknown operator {node.name}")
                continue
            if len(node.args) != spec.arity:
                reasons.append(f"{node.name} expects {spec.arity} arguments, got {len(node.args)}")
                continue
            for pos in sorted(spec.window_positions):
                arg = node.args[pos]
                if not (isinstance(arg, Num) and arg.is_int):
                    reasons.append(f"{node.name}: window parameter must be positive integer literal")
                elif not spec.min_window <= arg.value <= policy.max_window:
                    reasons.append(
                        f"{node.name}: window {int(arg.value)} outside [{spec.min_window}, {policy.max_window}]"
                    )
    return _reject(Layer.SEMANTIC, reasons) if reasons else ACCEPTED


def validate(
    ast: FormulaAst, registry: OperatorRegistry, policy: SandboxPolicy = SandboxPolicy()
) -> ValidationReport:
    """Run the three layers in order and return the first rejection."""
    for report in (
        validate_structure(ast, policy),
        validate_complexity(ast, policy),
        validate_semantics(ast, registry, policy),
    ):
        if not report.accepted:
            return report
    return ACCEPTED
