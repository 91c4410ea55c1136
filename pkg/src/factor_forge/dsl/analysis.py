from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass

from factor_forge.dsl.nodes import BinOp, Call, Compare, FormulaAst, Neg, Node, Num, Var, walk
from factor_forge.dsl.registry import OperatorRegistry, default_registry
from factor_forge.dsl.render import format_number

_DEFAULT_REGISTRY = default_registry()
KEY_LENGTH = 16


@dataclass(frozen=True)
class ComplexityProfile:
    depth: int
    node_count: int
    operator_count: int
    window_count: int


def window_literals(ast: FormulaAst, registry: OperatorRegistry | None = None) -> set[int]:
    """ids of the Num nodes that sit in a registered window-parameter position."""
    registry = registry or _DEFAULT_REGISTRY
    ids: set[int] = set()
    for node in walk(ast.root):
        if isinstance(node, Call):
            spec = registry.lookup(node.name)
            if spec is None:
                continue
            for pos in spec.window_positions:
                if pos < len(node.args) and isinstance(node.args[pos], Num):
                    ids.add(id(node.args[pos]))
    return ids


def measure_complexity(ast: FormulaAst, registry: OperatorRegistry | None = None) -> ComplexityProfile:
    # Every interior node (call, arithmetic, negation, comparison) counts as an operator.
    nodes = list(walk(ast.root))
    return ComplexityProfile(
        depth=ast.depth,
        node_count=len(nodes),
        operator_count=sum(1 for n in nodes if n.children()),
        window_count=len(window_literals(ast, registry)),
    )


def canonical_text(node: Node) -> str:
    """Fully parenthesised rendering with + and * operands in sorted order."""
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Num):
        return format_number(node)
    if isinstance(node, Call):
        return f"{node.name}({','.join(canonical_text(a) for a in node.args)})"
    if isinstance(node, (BinOp, Compare)):
        left, right = canonical_text(node.left), canonical_text(node.right)
        if node.op in ("+", "*") and right < left:
            left, right = right, left
        return f"({left}{node.op}{right})"
    if isinstance(node, Neg):
        return f"(-{canonical_text(node.operand)})"
    raise TypeError(f"cannot canonicalize node kind {node.kind!r}")


def canonicalize(ast: FormulaAst) -> str:
    digest = hashlib.sha256(canonical_text(ast.root).encode("utf-8")).hexdigest()
    return digest[:KEY_LENGTH]


def node_labels(ast: FormulaAst, registry: OperatorRegistry | None = None) -> Counter:
    windows = window_literals(ast, registry)
    labels: Counter = Counter()
    for node in walk(ast.root):
        if isinstance(node, (Call, Var)):
            labels[node.name] += 1
        elif isinstance(node, (BinOp, Compare)):
            labels[node.op] += 1
        elif isinstance(node, Neg):
            labels["neg"] += 1
        elif isinstance(node, Num):
            if id(node) in windows and node.value >= 1:
                labels[f"w{int(math.floor(math.log2(node.value)))}"] += 1
            else:
                labels["const"] += 1
    return labels


def formula_similarity(a: FormulaAst, b: FormulaAst, registry: OperatorRegistry | None = None) -> float:
    """Multiset Jaccard similarity of node labels, with window literals bucketed by floor(log2)."""
    la, lb = node_labels(a, registry), node_labels(b, registry)
    union = sum((la | lb).values())
    if union == 0:
        return 1.0
    return sum((la & lb).values()) / union
