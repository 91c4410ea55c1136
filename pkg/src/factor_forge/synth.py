"""Synthetic panels with a planted cross-sectional signal.

Next-day simple returns are ``vol * (beta * z_t + sigma * eps)`` where ``z_t``
is the cross-sectional z-score of a hidden factor observable at ``t``. With
``hidden="close"`` the factor is CLOSE itself, so the Pearson IC of the
formula ``CLOSE`` against one-day forward returns has expectation
``beta / sqrt(beta**2 + sigma**2)``.
"""

from __future__ import annotations

import math

import numpy as np
import pandas as pd

from factor_forge.engine import cs_zscore
from factor_forge.panel import Panel

HIDDEN_FACTORS = ("close", "range")


def planted_ic(beta: float, sigma: float) -> float:
    return beta / math.sqrt(beta * beta + sigma * sigma)


def synth_panel(
    assets: int,
    dates: int,
    beta: float = 0.05,
    sigma: float = 1.0,
    seed: int = 0,
    hidden: str = "close",
    start: str = "2022-01-03",
    vol: float = 0.01,
) -> Panel:
    if assets < 1 or dates < 2:
        raise ValueError("need at least 1 asset and 2 dates")
    if sigma < 0 or vol <= 0:
        raise ValueError("sigma must be non-negative and vol positive")
    if hidden not in HIDDEN_FACTORS:
        raise ValueError(f"hidden factor must be one of {HIDDEN_FACTORS}")
    rng = np.random.default_rng(seed)
    shape = (dates, assets)
    close = np.empty(shape)
    open_ = np.empty(shape)
    high = np.empty(shape)
    low = np.empty(shape)
    close[0] = 100.0 * np.exp(rng.normal(0.0, 0.3, assets))
    gap = rng.normal(0.0, 0.004, shape)
    up = np.abs(rng.normal(0.0, 0.008, shape))
    down = np.abs(rng.normal(0.0, 0.008, shape))
    eps = rng.normal(0.0, 1.0, shape)
    for t in range(dates):
        prev = close[t - 1] if t else close[0]
        open_[t] = prev * np.exp(gap[t])
        body_hi = np.maximum(open_[t], close[t])
        body_lo = np.minimum(open_[t], close[t])
        high[t] = body_hi * (1.0 + up[t])
        low[t] = body_lo / (1.0 + down[t])
        if t + 1 < dates:
            signal = close[t] if hidden == "close" else (high[t] - low[t]) / close[t]
            z = cs_zscore(signal[None, :])[0]
            close[t + 1] = close[t] * (1.0 + vol * (beta * z + sigma * eps[t]))
    volume = np.round(rng.lognormal(13.0, 0.5, shape))
    vwap = (high + low + close) / 3.0
    calendar = [d.strftime("%Y-%m-%d") for d in pd.bdate_range(start, periods=dates)]
    return Panel(
        calendar=calendar,
        assets=[f"S{i:04d}" for i in range(assets)],
        fields={"OPEN": open_, "HIGH": high, "LOW": low, "CLOSE": close, "VOLUME": volume, "VWAP": vwap},
    )
