"""Daily OHLCV/VWAP panels, forward-return labels and factor/label alignment.

Missing cells are NaN throughout; zero is always a real value.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

FIELD_COLUMNS = {
    "OPEN": "open",
    "HIGH": "high",
    "LOW": "low",
    "CLOSE": "close",
    "VOLUME": "volume",
    "VWAP": "vwap",
}
CSV_COLUMNS = ["date", "asset", "open", "high", "low", "close", "volume", "vwap"]
DEFAULT_MIN_ASSETS = 30
VALID_CLOSE_FRACTION = 0.8


class DataError(ValueError):
    """Unreadable or schema-violating market data."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LoadReport:
    rows: int
    sanity_violations: int
    valid_assets: int
    valid_close_fraction: float = VALID_CLOSE_FRACTION


@dataclass(frozen=True)
class Panel:
    calendar: tuple[str, ...]
    assets: tuple[str, ...]
    fields: Mapping[str, np.ndarray]
    load_report: LoadReport | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "calendar", tuple(self.calendar))
        object.__setattr__(self, "assets", tuple(self.assets))
        if any(a >= b for a, b in zip(self.calendar, self.calendar[1:])):
            raise DataError("calendar must be strictly increasing")
        if len(set(self.assets)) != len(self.assets):
            raise DataError("asset identifiers must be unique")
        shape = (len(self.calendar), len(self.assets))
        fixed = {}
        for name, values in self.fields.items():
            values = _readonly(values)
            if values.shape != shape:
                raise DataError(f"field {name} has shape {values.shape}, expected {shape}")
            fixed[name] = values
        object.__setattr__(self, "fields", fixed)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.calendar), len(self.assets))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.fields[name]

    def slice_dates(self, start: str | None = None, end: str | None = None) -> Panel:
        mask = np.array([(start is None or d >= start) and (end is None or d <= end) for d in self.calendar], dtype=bool)
        if not mask.any():
            raise DataError("empty calendar after date filtering")
        return Panel(
            calendar=tuple(d for d, m in zip(self.calendar, mask) if m),
            assets=self.assets,
            fields={k: v[mask] for k, v in self.fields.items()},
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update("\n".join(self.calendar).encode())
        h.update(b"\0")
        h.update("\n".join(self.assets).encode())
        for name in sorted(self.fields):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.fields[name]).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class _Matrix:
    values: np.ndarray
    calendar: tuple[str, ...]
    assets: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "calendar", tuple(self.calendar))
        object.__setattr__(self, "assets", tuple(self.assets))
        if self.values.shape != (len(self.calendar), len(self.assets)):
            raise ValueError("matrix shape does not match its axes")


@dataclass(frozen=True)
class FactorMatrix(_Matrix):
    provenance: str = ""

    def __post_init__(self) -> None:
        super().__post_init__()
        v = np.array(self.values)
        v[~np.isfinite(v)] = np.nan
        object.__setattr__(self, "values", _readonly(v))


@dataclass(frozen=True)
class LabelMatrix(_Matrix):
    horizon: int = 1


@dataclass(frozen=True)
class AlignmentStats:
    coverage: float
    drop_ratio: float
    valid_cells: int
    valid_dates: int
    total_cells: int


@dataclass(frozen=True)
class AlignedPair:
    factor: FactorMatrix
    labels: LabelMatrix

    @property
    def calendar(self) -> tuple[str, ...]:
        return self.factor.calendar

    @property
    def assets(self) -> tuple[str, ...]:
        return self.factor.assets


def _read_universe(path: str | Path) -> list[str]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def _sanity_mask(f: Mapping[str, np.ndarray]) -> np.ndarray:
    """True where a present value breaks HIGH >= max(OPEN, CLOSE) >= min(OPEN, CLOSE) >= LOW > 0."""
    o, h, l, c, v = f["OPEN"], f["HIGH"], f["LOW"], f["CLOSE"], f["VOLUME"]
    with np.errstate(invalid="ignore"):
        bad = (h < o) | (h < c) | (o < l) | (c < l) | (h < l) | (l <= 0) | (o <= 0) | (c <= 0) | (h <= 0)
        bad |= v < 0
    return bad


def load_panel(
    source: str | Path,
    universe: str | Path | None = None,
    start: str | None = None,
    end: str | None = None,
    valid_close_fraction: float = VALID_CLOSE_FRACTION,
) -> Panel:
    """Load a long-format CSV (``date,asset,open,high,low,close,volume,vwap``) into a Panel.

    Rows violating the OHLC ordering are blanked (all fields missing) and counted
    in ``panel.load_report.sanity_violations``.
    """
    try:
        df = pd.read_csv(source, dtype={"asset": str, "date": str}, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read panel file {source}: {exc}") from exc
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"panel file missing required columns: {', '.join(missing)}")
    try:
        dates = pd.to_datetime(df["date"], format="%Y-%m-%d")
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad date in panel file: {exc}") from exc
    if dates.isna().any():
        raise DataError("panel file has rows without a date")
    df = df.assign(date=dates.dt.strftime("%Y-%m-%d"))
    if universe is not None:
        try:
            names = set(_read_universe(universe))
        except OSError as exc:
            raise DataError(f"cannot read universe file {universe}: {exc}") from exc
        df = df[df["asset"].isin(names)]
    if start:
        df = df[df["date"] >= start]
    if end:
        df = df[df["date"] <= end]
    if df.empty:
        raise DataError("empty calendar after filtering")
    if df.duplicated(["date", "asset"]).any():
        raise DataError("duplicate (date, asset) rows in panel file")
    for col in CSV_COLUMNS[2:]:
        df[col] = pd.to_numeric(df[col], errors="coerce")

    calendar = sorted(df["date"].unique())
    assets = sorted(df["asset"].unique())
    fields = {}
    for name, col in FIELD_COLUMNS.items():
        wide = df.pivot(index="date", columns="asset", values=col).reindex(index=calendar, columns=assets)
        fields[name] = wide.to_numpy(dtype=float)
    bad = _sanity_mask(fields)
    n_bad = int(bad.sum())
    if n_bad:
        log.warning("%d panel rows violate OHLC ordering; set missing", n_bad)
        for name in fields:
            fields[name][bad] = np.nan
    close_ok = np.mean(~np.isnan(fields["CLOSE"]), axis=0)
    report = LoadReport(
        rows=len(df),
        sanity_violations=n_bad,
        valid_assets=int(np.sum(close_ok >= valid_close_fraction)),
        valid_close_fraction=valid_close_fraction,
    )
    return Panel(calendar=calendar, assets=assets, fields=fields, load_report=report)


def write_panel_csv(panel: Panel, path: str | Path, float_format: str = "%.10g") -> None:
    t, n = panel.shape
    frame = pd.DataFrame(
        {
            "date": np.repeat(np.array(panel.calendar, dtype=object), n),
            "asset": np.tile(np.array(panel.assets, dtype=object), t),
        }
    )
    for name, col in FIELD_COLUMNS.items():
        frame[col] = panel.fields[name].reshape(-1)
    frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n")


def forward_returns(panel: Panel, horizon: int = 1) -> LabelMatrix:
    """Simple close-to-close return from t to t+horizon, stored at row t."""
    t = len(panel.calendar)
    if not 1 <= horizon < t:
        raise ValueError(f"horizon must be in [1, {t - 1}], got {horizon}")
    close = panel["CLOSE"]
    out = np.full(close.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[:-horizon] = close[horizon:] / close[:-horizon] - 1.0
    out[~np.isfinite(out)] = np.nan
    return LabelMatrix(values=out, calendar=panel.calendar, assets=panel.assets, horizon=horizon)


def align(
    factor: FactorMatrix, labels: LabelMatrix, min_assets: int = DEFAULT_MIN_ASSETS
) -> tuple[AlignedPair, AlignmentStats]:
    """Keep cells where both factor and label are present, on dates with enough such cells.

    Coverage is measured against every cell on dates that carry at least one
    label (so trailing label rows, which can never be evaluated, are excluded).
    """
    if factor.calendar != labels.calendar or factor.assets != labels.assets:
        raise ValueError("factor and label axes do not match")
    f, y = factor.values, labels.values
    both = ~np.isnan(f) & ~np.isnan(y)
    counts = both.sum(axis=1)
    keep = counts >= max(min_assets, 1)
    label_dates = (~np.isnan(y)).any(axis=1)
    total = int(label_dates.sum()) * len(factor.assets)
    valid = int(counts[keep].sum())
    coverage = valid / total if total else 0.0
    stats = AlignmentStats(
        coverage=coverage,
        drop_ratio=1.0 - coverage,
        valid_cells=valid,
        valid_dates=int(keep.sum()),
        total_cells=total,
    )
    cal = tuple(d for d, k in zip(factor.calendar, keep) if k)
    mask = both[keep]
    fv = np.where(mask, f[keep], np.nan)
    yv = np.where(mask, y[keep], np.nan)
    pair = AlignedPair(
        factor=FactorMatrix(values=fv, calendar=cal, assets=factor.assets, provenance=factor.provenance),
        labels=LabelMatrix(values=yv, calendar=cal, assets=labels.assets, horizon=labels.horizon),
    )
    return pair, stats


def panel_from_arrays(
    calendar: Sequence[str], assets: Sequence[str], **fields: np.ndarray
) -> Panel:
    """Convenience constructor; missing OHLC fields default to CLOSE, VOLUME to 1."""
    close = np.asarray(fields["CLOSE"], dtype=float)
    full = {name: np.asarray(fields.get(name, close), dtype=float) for name in ("OPEN", "HIGH", "LOW", "CLOSE", "VWAP")}
    full["VOLUME"] = np.asarray(fields.get("VOLUME", np.ones_like(close)), dtype=float)
    return Panel(calendar=calendar, assets=assets, fields=full)


__all__ = [
    "AlignedPair",
    "AlignmentStats",
    "DataError",
    "FactorMatrix",
    "LabelMatrix",
    "LoadReport",
    "Panel",
    "align",
    "forward_returns",
    "load_panel",
    "panel_from_arrays",
    "write_panel_csv",
]
