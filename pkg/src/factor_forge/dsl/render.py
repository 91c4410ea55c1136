from __future__ import annotations

from factor_forge.dsl.nodes import (
    Attribute,
    BinOp,
    Call,
    Compare,
    Foreign,
    Neg,
    Node,
    Num,
    Str,
    Subscript,
    Var,
)

_PREC = {"compare": 1, "+": 2, "-": 2, "*": 3, "/": 3, "neg": 4}
_ATOM = 5


def format_number(node: Num) -> str:
    if node.is_int:
        return str(int(node.value))
    text = repr(float(node.value))
    return text


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Compare):
        return _PREC["compare"]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _ATOM


def _wrap(text: str, cond: bool) -> str:
    return f"({text})" if cond else text


def render(node: Node) -> str:
    """Render a tree as DSL text using the minimal parentheses that preserve its shape."""
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Num):
        return format_number(node)
    if isinstance(node, Call):
        return f"{node.name}({', '.join(render(a) for a in node.args)})"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = _wrap(render(node.left), _prec(node.left) < p)
        right = _wrap(render(node.right), _prec(node.right) <= p)
        return f"{left} {node.op} {right}"
    if isinstance(node, Compare):
        left = _wrap(render(node.left), _prec(node.left) <= 1)
        right = _wrap(render(node.right), _prec(node.right) <= 1)
        return f"{left} {node.op} {right}"
    if isinstance(node, Neg):
        return "-" + _wrap(render(node.operand), _prec(node.operand) < _PREC["neg"])
    # Hostile kinds only get a diagnostic rendering; they never round-trip.
    if isinstance(node, Str):
        return repr(node.value)
    if isinstance(node, Attribute):
        return f"{render(node.value)}.{node.attr}"
    if isinstance(node, Subscript):
        return f"{render(node.value)}[{render(node.index)}]"
    if isinstance(node, Foreign):
        return f"<{node.label}>"
    raise TypeError(f"cannot render {type(node).__name__}")
