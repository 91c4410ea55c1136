from __future__ import annotations

import logging
from enum import Enum

from factor_forge.dsl.nodes import BinOp, Call, Compare, FormulaAst, Neg, Node, Num, Var, walk
from factor_forge.dsl.registry import PRICE_FIELDS

log = logging.getLogger(__name__)

SHORT_RETURN_LAG = 5


class Family(str, Enum):
    PRICE_TREND = "price-trend"
    MEAN_REVERSION = "mean-reversion"
    VOLATILITY = "volatility"
    RANGE = "range"
    LIQUIDITY_VOLUME = "liquidity-volume"
    PRICE_VOLUME = "price-volume-interaction"
    OTHER = "other"


# The six themes the generator is asked to spread across.
THEMES = tuple(f for f in Family if f is not Family.OTHER)


def parse_family(value: str | Family | None) -> Family | None:
    """Lenient label parsing: accepts ``price trend``, ``Price_Trend`` etc; unknown -> None."""
    if value is None or isinstance(value, Family):
        return value
    norm = str(value).strip().lower().replace("_", "-").replace(" ", "-")
    aliases = {"trend": Family.PRICE_TREND, "liquidity": Family.LIQUIDITY_VOLUME, "price-volume": Family.PRICE_VOLUME}
    try:
        return Family(norm)
    except ValueError:
        return aliases.get(norm)


def _vars(node: Node) -> set[str]:
    return {n.name for n in walk(node) if isinstance(n, Var)}


def _calls(node: Node, name: str) -> list[Call]:
    return [n for n in walk(node) if isinstance(n, Call) and n.name == name]


def _has_price(node: Node) -> bool:
    return bool(_vars(node) & set(PRICE_FIELDS))


def _price_outside_sma(node: Node) -> bool:
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Call) and cur.name == "TS_SMA":
            continue
        if isinstance(cur, Var) and cur.name in PRICE_FIELDS:
            return True
        stack.extend(cur.children())
    return False


def _anchor_vs_price(root: Node) -> bool:
    for node in walk(root):
        if isinstance(node, Compare) or (isinstance(node, BinOp) and node.op in ("-", "/")):
            for a, b in ((node.left, node.right), (node.right, node.left)):
                if any(_has_price(c.args[0]) for c in _calls(a, "TS_SMA") if c.args) and _price_outside_sma(b):
                    return True
    return False


def _short_return(node: Node) -> bool:
    for call in _calls(node, "TS_LOGRET"):
        if len(call.args) == 2 and isinstance(call.args[1], Num) and call.args[1].value <= SHORT_RETURN_LAG:
            return True
    return False


def infer_family(ast: FormulaAst) -> Family:
    root = ast.root
    names = _vars(root)
    if {"HIGH", "LOW"} <= names:
        return Family.RANGE
    for op in ("TS_STD", "TS_VAR"):
        if any(c.args and _calls(c.args[0], "TS_LOGRET") for c in _calls(root, op)):
            return Family.VOLATILITY
    has_price = bool(names & set(PRICE_FIELDS))
    if "VOLUME" in names:
        return Family.PRICE_VOLUME if has_price else Family.LIQUIDITY_VOLUME
    if _anchor_vs_price(root):
        return Family.PRICE_TREND
    if any(_short_return(n.operand) for n in walk(root) if isinstance(n, Neg)):
        return Family.MEAN_REVERSION
    if any(c.args and _has_price(c.args[0]) for c in _calls(root, "CS_ZSCORE")):
        return Family.MEAN_REVERSION
    return Family.OTHER


def classify_family(ast: FormulaAst, declared: str | Family | None = None) -> Family:
    """Declared label wins; otherwise the first matching rule of the ladder."""
    if declared is not None:
        fam = parse_family(declared)
        if fam is not None:
            return fam
        log.warning("unknown declared family %r; inferring from formula", declared)
    return infer_family(ast)
