"""Recursive-descent parser for the factor formula grammar.

Grammar::

    expr       := additive [cmp_op additive]
    additive   := term (("+" | "-") term)*
    term       := unary (("*" | "/") unary)*
    unary      := "-"* primary
    primary    := NUMBER | IDENT | IDENT "(" [expr ("," expr)*] ")" | "(" expr ")"

Comparisons do not chain. Parsing never evaluates anything.
"""

from __future__ import annotations

import ast as pyast
import math
import re
from dataclasses import dataclass

from factor_forge.dsl.nodes import (
    COMPARE_OPS,
    Attribute,
    BinOp,
    Call,
    Compare,
    Foreign,
    FormulaAst,
    Neg,
    Node,
    Num,
    Str,
    Subscript,
    Var,
)

MAX_CHARS = 4096
# Hard parser bounds, independent of the (configurable) complexity policy.
MAX_NESTING = 64
MAX_TREE_DEPTH = 256

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|[-+*/<>(),])
    """,
    re.VERBOSE | re.ASCII,
)


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


@dataclass(frozen=True)
class Token:
    type: str
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = tokenize(text)
        self.i = 0
        self.nesting = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            raise FormulaSyntaxError(f"expected {text!r}, found {self._describe()}", self.tok.offset)
        return self.advance()

    def _describe(self) -> str:
        return "end of input" if self.tok.type == "end" else repr(self.tok.text)

    def _check_depth(self, node: Node, offset: int) -> Node:
        if node.depth > MAX_TREE_DEPTH:
            raise FormulaSyntaxError("expression too deep", offset)
        return node

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.type != "end":
            raise FormulaSyntaxError(f"unexpected {self._describe()}", self.tok.offset)
        return node

    def expr(self) -> Node:
        left = self.additive()
        if self.tok.text in COMPARE_OPS:
            op = self.advance()
            right = self.additive()
            left = self._check_depth(Compare(op=op.text, left=left, right=right), op.offset)
            if self.tok.text in COMPARE_OPS:
                raise FormulaSyntaxError("chained comparison", self.tok.offset)
        return left

    def additive(self) -> Node:
        left = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance()
            right = self.term()
            left = self._check_depth(BinOp(op=op.text, left=left, right=right), op.offset)
        return left

    def term(self) -> Node:
        left = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance()
            right = self.unary()
            left = self._check_depth(BinOp(op=op.text, left=left, right=right), op.offset)
        return left

    def unary(self) -> Node:
        offsets = []
        while self.tok.text == "-":
            offsets.append(self.advance().offset)
        node = self.primary()
        for off in reversed(offsets):
            node = self._check_depth(Neg(operand=node), off)
        return node

    def _enter(self, offset: int) -> None:
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            raise FormulaSyntaxError("nesting too deep", offset)

    def primary(self) -> Node:
        tok = self.tok
        if tok.type == "number":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise FormulaSyntaxError("numeric literal out of range", tok.offset)
            is_int = tok.text.isdigit()
            return Num(value=value, is_int=is_int)
        if tok.type == "ident":
            self.advance()
            if self.tok.text != "(":
                return Var(name=tok.text)
            open_tok = self.advance()
            self._enter(open_tok.offset)
            args: list[Node] = []
            if self.tok.text != ")":
                args.append(self.expr())
                while self.tok.text == ",":
                    comma = self.advance()
                    if self.tok.text == ")" or self.tok.type == "end":
                        raise FormulaSyntaxError("dangling comma", comma.offset)
                    args.append(self.expr())
            self.expect(")")
            self.nesting -= 1
            return self._check_depth(Call(name=tok.text, args=tuple(args)), tok.offset)
        if tok.text == "(":
            self.advance()
            self._enter(tok.offset)
            node = self.expr()
            self.expect(")")
            self.nesting -= 1
            return node
        raise FormulaSyntaxError(f"unexpected {self._describe()}", tok.offset)


def parse_formula(text: str) -> FormulaAst:
    """Parse formula text into a :class:`FormulaAst`.

    Raises :class:`FormulaSyntaxError` (carrying a character offset) on malformed
    input or when the text exceeds ``MAX_CHARS``.
    """
    if not isinstance(text, str):
        raise TypeError("formula text must be str")
    if len(text) > MAX_CHARS:
        raise FormulaSyntaxError(f"formula exceeds {MAX_CHARS} characters", MAX_CHARS)
    if not text.strip():
        raise FormulaSyntaxError("empty formula", 0)
    return FormulaAst(root=_Parser(text).parse(), source=text)


_PY_BINOPS = {pyast.Add: "+", pyast.Sub: "-", pyast.Mult: "*", pyast.Div: "/"}
_PY_CMPOPS = {
    pyast.Lt: "<",
    pyast.LtE: "<=",
    pyast.Gt: ">",
    pyast.GtE: ">=",
    pyast.Eq: "==",
    pyast.NotEq: "!=",
}


def _convert(node: pyast.AST) -> Node:
    if isinstance(node, pyast.Expression):
        return _convert(node.body)
    if isinstance(node, pyast.Name):
        return Var(name=node.id)
    if isinstance(node, pyast.Constant):
        if isinstance(node.value, bool) or node.value is None:
            return Foreign(label=type(node.value).__name__)
        if isinstance(node.value, int):
            try:
                return Num(value=float(node.value), is_int=True)
            except OverflowError:
                return Foreign(label="int")
        if isinstance(node.value, float):
            return Num(value=node.value, is_int=False)
        if isinstance(node.value, str):
            return Str(value=node.value)
        return Foreign(label=type(node.value).__name__)
    if isinstance(node, pyast.BinOp) and type(node.op) in _PY_BINOPS:
        return BinOp(op=_PY_BINOPS[type(node.op)], left=_convert(node.left), right=_convert(node.right))
    if isinstance(node, pyast.UnaryOp) and isinstance(node.op, pyast.USub):
        return Neg(operand=_convert(node.operand))
    if (
        isinstance(node, pyast.Compare)
        and len(node.ops) == 1
        and type(node.ops[0]) in _PY_CMPOPS
    ):
        return Compare(
            op=_PY_CMPOPS[type(node.ops[0])],
            left=_convert(node.left),
            right=_convert(node.comparators[0]),
        )
    if isinstance(node, pyast.Call) and isinstance(node.func, pyast.Name) and not node.keywords:
        return Call(name=node.func.id, args=tuple(_convert(a) for a in node.args))
    if isinstance(node, pyast.Attribute):
        return Attribute(value=_convert(node.value), attr=node.attr)
    if isinstance(node, pyast.Subscript):
        return Subscript(value=_convert(node.value), index=_convert(node.slice))
    parts = tuple(_convert(c) for c in pyast.iter_child_nodes(node) if isinstance(c, pyast.expr))
    return Foreign(label=type(node).__name__, parts=parts)


def from_python_ast(text: str) -> FormulaAst:
    """Raw-tree entry point: translate Python expression syntax node-for-node.

    Anything outside the formula grammar is kept as a non-whitelisted node so the
    structural sandbox layer can reject it. Nothing is compiled or executed.
    """
    if len(text) > MAX_CHARS:
        raise FormulaSyntaxError(f"formula exceeds {MAX_CHARS} characters", MAX_CHARS)
    try:
        tree = pyast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise FormulaSyntaxError(exc.msg or "invalid syntax", max((exc.offset or 1) - 1, 0)) from None
    except (RecursionError, MemoryError, ValueError):
        raise FormulaSyntaxError("expression too deep", 0) from None
    try:
        root = _convert(tree)
    except RecursionError:
        raise FormulaSyntaxError("expression too deep", 0) from None
    return FormulaAst(root=root, source=text)
