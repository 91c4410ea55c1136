"""Formula tree node types.

The parser only ever builds the whitelisted kinds (``call``, ``var``, ``num``,
``binop``, ``neg``, ``compare``). The remaining kinds exist so that trees
arriving through :func:`factor_forge.dsl.parser.from_python_ast` can represent
hostile constructs faithfully and be rejected by the structural layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Iterator

ARITH_OPS = ("+", "-", "*", "/")
COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")


@dataclass(frozen=True)
class Node:
    kind: ClassVar[str] = "node"
    depth: int = field(init=False, repr=False, compare=False)
    size: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        kids = tuple(self.children())
        object.__setattr__(self, "depth", 1 + max((k.depth for k in kids), default=0))
        object.__setattr__(self, "size", 1 + sum(k.size for k in kids))

    def children(self) -> tuple[Node, ...]:
        return ()


@dataclass(frozen=True)
class Var(Node):
    kind: ClassVar[str] = "var"
    name: str = ""


@dataclass(frozen=True)
class Num(Node):
    kind: ClassVar[str] = "num"
    value: float = 0.0
    is_int: bool = False


@dataclass(frozen=True)
class Call(Node):
    kind: ClassVar[str] = "call"
    name: str = ""
    args: tuple[Node, ...] = ()

    def children(self) -> tuple[Node, ...]:
        return self.args


@dataclass(frozen=True)
class BinOp(Node):
    kind: ClassVar[str] = "binop"
    op: str = "+"
    left: Node = None  # type: ignore[assignment]
    right: Node = None  # type: ignore[assignment]

    def children(self) -> tuple[Node, ...]:
        return (self.left, self.right)


@dataclass(frozen=True)
class Neg(Node):
    kind: ClassVar[str] = "neg"
    operand: Node = None  # type: ignore[assignment]

    def children(self) -> tuple[Node, ...]:
        return (self.operand,)


@dataclass(frozen=True)
class Compare(Node):
    kind: ClassVar[str] = "compare"
    op: str = "<"
    left: Node = None  # type: ignore[assignment]
    right: Node = None  # type: ignore[assignment]

    def children(self) -> tuple[Node, ...]:
        return (self.left, self.right)


# Non-whitelisted kinds. Never produced by the DSL parser.


@dataclass(frozen=True)
class Str(Node):
    kind: ClassVar[str] = "string"
    value: str = ""


@dataclass(frozen=True)
class Attribute(Node):
    kind: ClassVar[str] = "attribute"
    value: Node = None  # type: ignore[assignment]
    attr: str = ""

    def children(self) -> tuple[Node, ...]:
        return (self.value,)


@dataclass(frozen=True)
class Subscript(Node):
    kind: ClassVar[str] = "subscript"
    value: Node = None  # type: ignore[assignment]
    index: Node = None  # type: ignore[assignment]

    def children(self) -> tuple[Node, ...]:
        return (self.value, self.index)


@dataclass(frozen=True)
class Foreign(Node):
    """Any other host-language construct (lambda, import, assignment, ...)."""

    kind: ClassVar[str] = "foreign"
    label: str = ""
    parts: tuple[Node, ...] = ()

    def children(self) -> tuple[Node, ...]:
        return self.parts


def kind_of(node: Node) -> str:
    if isinstance(node, Foreign):
        return f"foreign:{node.label}"
    return node.kind


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal without recursion (safe on arbitrarily deep trees)."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(cur.children()))


@dataclass(frozen=True)
class FormulaAst:
    root: Node
    source: str = ""

    @property
    def depth(self) -> int:
        return self.root.depth

    @property
    def size(self) -> int:
        return self.root.size

    def __str__(self) -> str:
        from factor_forge.dsl.render import render

        return render(self.root)
