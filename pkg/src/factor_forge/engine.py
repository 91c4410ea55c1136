"""Formula interpreter over panels.

All kernels work on date x asset float arrays (rows are dates). Time-series
kernels look strictly backwards; cross-sectional kernels touch one row at a
time. Domain problems (division by zero, log of non-positive values, short
windows) become NaN cells rather than exceptions.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from factor_forge.dsl.analysis import canonicalize
from factor_forge.dsl.nodes import BinOp, Call, Compare, FormulaAst, Neg, Node, Num, Var
from factor_forge.dsl.registry import OperatorRegistry, default_registry
from factor_forge.panel import FactorMatrix, Panel

_DEFAULT_REGISTRY = default_registry()


class SandboxBypassError(RuntimeError):
    """A tree that should have been rejected by the sandbox reached the interpreter."""


def _finite(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x[~np.isfinite(x)] = np.nan
    return x


def _rolling(x: np.ndarray, window: int, reducer: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    if window < 1 or window > x.shape[0]:
        return out
    windows = sliding_window_view(x, window, axis=0)  # (T - w + 1, N, w)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        out[window - 1 :] = reducer(windows)
    return _finite(out)


def ts_sma(x: np.ndarray, window: int) -> np.ndarray:
    """Rolling mean; any missing value inside the window poisons the output."""
    return _rolling(x, window, lambda w: w.mean(axis=-1))


def ts_std(x: np.ndarray, window: int) -> np.ndarray:
    """Rolling sample standard deviation (divisor window - 1)."""
    if window < 2:
        return np.full(np.shape(x), np.nan)
    return _rolling(x, window, lambda w: w.std(axis=-1, ddof=1))


def ts_var(x: np.ndarray, window: int) -> np.ndarray:
    if window < 2:
        return np.full(np.shape(x), np.nan)
    return _rolling(x, window, lambda w: w.var(axis=-1, ddof=1))


def ts_logret(x: np.ndarray, lag: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    if lag < 1 or lag >= x.shape[0]:
        return out
    cur, prev = x[lag:], x[:-lag]
    with np.errstate(invalid="ignore", divide="ignore"):
        ok = (cur > 0) & (prev > 0)
        out[lag:] = np.where(ok, np.log(np.where(ok, cur, 1.0) / np.where(ok, prev, 1.0)), np.nan)
    return _finite(out)


def cs_rank(x: np.ndarray) -> np.ndarray:
    """Average-tie ranks per row mapped to [0, 1]; a lone present value maps to 0.5."""
    x = np.asarray(x, dtype=float)
    ranks = pd.DataFrame(x).rank(axis=1, method="average").to_numpy(dtype=float)
    n = np.sum(~np.isnan(x), axis=1, keepdims=True).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(n > 1, (ranks - 1.0) / (n - 1.0), 0.5)
    out[np.isnan(x)] = np.nan
    return out


def cs_zscore(x: np.ndarray) -> np.ndarray:
    """Row z-score with sample std; constant or single-value rows map to 0."""
    x = np.asarray(x, dtype=float)
    present = ~np.isnan(x)
    n = present.sum(axis=1, keepdims=True)
    filled = np.where(present, x, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = filled.sum(axis=1, keepdims=True) / n
        dev = np.where(present, x - mean, 0.0)
        std = np.sqrt((dev**2).sum(axis=1, keepdims=True) / (n - 1))
        hi = np.where(present, x, -np.inf).max(axis=1, keepdims=True)
        lo = np.where(present, x, np.inf).min(axis=1, keepdims=True)
        degenerate = (n < 2) | (hi == lo) | ~np.isfinite(std) | (std == 0)
        out = np.where(degenerate, 0.0, dev / np.where(degenerate, 1.0, std))
    out[~present] = np.nan
    return _finite(out)


def if_op(cond: np.ndarray, then: np.ndarray, other: np.ndarray) -> np.ndarray:
    cond = np.asarray(cond, dtype=float)
    out = np.where(cond != 0, then, other).astype(float)
    out[np.isnan(cond)] = np.nan
    return out


TIME_SERIES_KERNELS = {"TS_SMA": ts_sma, "TS_STD": ts_std, "TS_VAR": ts_var, "TS_LOGRET": ts_logret}
CROSS_SECTIONAL_KERNELS = {"CS_RANK": cs_rank, "CS_ZSCORE": cs_zscore}

_COMPARE = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
}


class _Interpreter:
    def __init__(self, panel: Panel, registry: OperatorRegistry) -> None:
        self.panel = panel
        self.registry = registry
        self.shape = panel.shape

    def run(self, node: Node) -> np.ndarray:
        if isinstance(node, Var):
            if node.name not in self.registry.fields or node.name not in self.panel.fields:
                raise SandboxBypassError(f"unknown variable {node.name}")
            return np.array(self.panel[node.name], dtype=float)
        if isinstance(node, Num):
            return np.full(self.shape, float(node.value))
        if isinstance(node, Neg):
            return -self.run(node.operand)
        if isinstance(node, BinOp):
            a, b = self.run(node.left), self.run(node.right)
            with np.errstate(all="ignore"):
                if node.op == "+":
                    out = a + b
                elif node.op == "-":
                    out = a - b
                elif node.op == "*":
                    out = a * b
                elif node.op == "/":
                    out = a / b
                else:
                    raise SandboxBypassError(f"unknown arithmetic operator {node.op}")
            return _finite(out)
        if isinstance(node, Compare):
            a, b = self.run(node.left), self.run(node.right)
            fn = _COMPARE.get(node.op)
            if fn is None:
                raise SandboxBypassError(f"unknown comparison {node.op}")
            out = fn(a, b).astype(float)
            out[np.isnan(a) | np.isnan(b)] = np.nan
            return out
        if isinstance(node, Call):
            return self.call(node)
        raise SandboxBypassError(f"node kind {node.kind!r} reached the interpreter")

    def call(self, node: Call) -> np.ndarray:
        spec = self.registry.lookup(node.name)
        if spec is None or len(node.args) != spec.arity:
            raise SandboxBypassError(f"unregistered operator {node.name}/{len(node.args)}")
        if node.name in TIME_SERIES_KERNELS:
            window = node.args[1]
            if not isinstance(window, Num):
                raise SandboxBypassError(f"{node.name}: non-literal window")
            return TIME_SERIES_KERNELS[node.name](self.run(node.args[0]), int(window.value))
        if node.name in CROSS_SECTIONAL_KERNELS:
            return CROSS_SECTIONAL_KERNELS[node.name](self.run(node.args[0]))
        if node.name == "IF":
            return if_op(*(self.run(a) for a in node.args))
        raise SandboxBypassError(f"no kernel for operator {node.name}")


def evaluate(ast: FormulaAst, panel: Panel, registry: OperatorRegistry | None = None) -> FactorMatrix:
    """Interpret a sandbox-accepted formula over ``panel``."""
    values = _Interpreter(panel, registry or _DEFAULT_REGISTRY).run(ast.root)
    return FactorMatrix(values=values, calendar=panel.calendar, assets=panel.assets, provenance=canonicalize(ast))
