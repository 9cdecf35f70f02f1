"""Price-series ingestion, log-return panels, and regime window handling.

Input CSVs carry a ``date,price`` header with ISO-8601 dates. The three
assets are aligned by strict date intersection (no imputation), returns are
computed over consecutive aligned dates, and each return is stamped with the
later date of its price pair, which is also the date regime windows match on.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError

ASSETS = ("sp500", "oil", "gas")
FAMILIES = ("clayton", "frank", "gumbel", "gauss", "student_t")
VARIANCE_LABELS = ("VL", "L", "M", "H")


def _as_day(value) -> np.datetime64:
    try:
        return np.datetime64(str(value), "D")
    except ValueError as exc:
        raise DataError(f"invalid ISO-8601 date {value!r}") from exc


@dataclass(frozen=True)
class PriceSeries:
    asset_id: str
    dates: np.ndarray  # datetime64[D], strictly increasing
    prices: np.ndarray  # positive floats

    def __post_init__(self):
        if self.dates.size == 0:
            raise DataError(f"{self.asset_id}: empty price series")
        if self.dates.size != self.prices.size:
            raise DataError(f"{self.asset_id}: dates/prices length mismatch")
        if np.any(np.diff(self.dates).astype(int) <= 0):
            raise DataError(f"{self.asset_id}: dates must be strictly increasing")
        if not np.all(self.prices > 0.0):
            raise DataError(f"{self.asset_id}: prices must be positive")

    def __len__(self) -> int:
        return self.dates.size


def load_price_csv(path, asset_id: str) -> PriceSeries:
    """Parse a ``date,price`` CSV into a validated :class:`PriceSeries`.

    Malformed rows are rejected with their 1-based row number in the message.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"price file not found: {path}")
    dates, prices = [], []
    seen = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [c.strip().lower() for c in header[:2]] != ["date", "price"]:
            raise DataError(f"{path}: expected 'date,price' header, got {header!r}")
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2 or not row[0].strip() or not row[1].strip():
                raise DataError(f"{path} row {rownum}: missing date or price")
            try:
                day = np.datetime64(row[0].strip(), "D")
            except ValueError:
                raise DataError(f"{path} row {rownum}: malformed date {row[0]!r}") from None
            try:
                price = float(row[1])
            except ValueError:
                raise DataError(f"{path} row {rownum}: malformed price {row[1]!r}") from None
            if not np.isfinite(price) or price <= 0.0:
                raise DataError(f"{path} row {rownum}: non-positive price {row[1]!r}")
            if day in seen:
                raise DataError(f"{path} row {rownum}: duplicate date {row[0]!r}")
            seen.add(day)
            dates.append(day)
            prices.append(price)
    if not dates:
        raise DataError(f"{path}: no data rows")
    order = np.argsort(np.array(dates))
    return PriceSeries(
        asset_id=asset_id,
        dates=np.array(dates)[order],
        prices=np.array(prices, dtype=float)[order],
    )


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned daily log returns, columns ordered (sp500, oil, gas)."""

    dates: np.ndarray  # datetime64[D] of the later date of each price pair
    returns: np.ndarray  # shape (n, 3)

    def __post_init__(self):
        if self.returns.ndim != 2 or self.returns.shape[1] != 3:
            raise DataError("returns must have shape (n, 3)")
        if self.dates.size != self.returns.shape[0]:
            raise DataError("dates/returns length mismatch")
        if self.dates.size and np.any(np.diff(self.dates).astype(int) <= 0):
            raise DataError("panel dates must be strictly increasing")

    def __len__(self) -> int:
        return self.dates.size


def log_returns(a: PriceSeries, b: PriceSeries, c: PriceSeries) -> ReturnPanel:
    """Align three price series on common dates and take daily log returns."""
    common = np.intersect1d(np.intersect1d(a.dates, b.dates), c.dates)
    if common.size < 2:
        raise DataError(
            f"common-date intersection has {common.size} dates; need at least 2"
        )
    cols = []
    for series in (a, b, c):
        idx = np.searchsorted(series.dates, common)
        p = series.prices[idx]
        cols.append(np.log(p[1:] / p[:-1]))
    return ReturnPanel(dates=common[1:], returns=np.column_stack(cols))


@dataclass(frozen=True)
class RegimeSpec:
    """One dated regime window with variance labels and a copula family."""

    id: int
    start: np.datetime64
    end: np.datetime64
    labels: tuple  # (sp500, oil, gas) variance labels
    family: str
    fixed_params: dict | None = None

    def __post_init__(self):
        if self.start > self.end:
            raise DataError(f"regime {self.id}: start after end")
        if self.family not in FAMILIES:
            raise DataError(f"regime {self.id}: unknown family {self.family!r}")
        if len(self.labels) != 3 or any(l not in VARIANCE_LABELS for l in self.labels):
            raise DataError(f"regime {self.id}: bad variance labels {self.labels!r}")


@dataclass(frozen=True)
class RegimeTable:
    regimes: tuple

    def __post_init__(self):
        ids = [r.id for r in self.regimes]
        if len(set(ids)) != len(ids):
            raise DataError("regime ids must be unique")
        for prev, cur in zip(self.regimes, self.regimes[1:]):
            if cur.start <= prev.end:
                raise DataError(
                    f"regimes {prev.id} and {cur.id} overlap or are out of order"
                )

    def __iter__(self):
        return iter(self.regimes)

    def __len__(self) -> int:
        return len(self.regimes)

    def by_id(self, regime_id: int) -> RegimeSpec:
        for r in self.regimes:
            if r.id == regime_id:
                return r
        raise KeyError(regime_id)


def slice_by_regime(panel: ReturnPanel, spec: RegimeSpec) -> ReturnPanel:
    """Sub-panel of return dates falling in [spec.start, spec.end] inclusive."""
    mask = (panel.dates >= spec.start) & (panel.dates <= spec.end)
    if not mask.any():
        raise DataError(
            f"regime {spec.id} window {spec.start}..{spec.end} does not intersect panel"
        )
    return ReturnPanel(dates=panel.dates[mask], returns=panel.returns[mask])


def _regime_from_dict(obj) -> RegimeSpec:
    try:
        return RegimeSpec(
            id=int(obj["id"]),
            start=_as_day(obj["start"]),
            end=_as_day(obj["end"]),
            labels=tuple(obj["labels"]),
            family=str(obj["family"]),
            fixed_params=obj.get("params"),
        )
    except KeyError as exc:
        raise DataError(f"regime entry missing field {exc}") from None


def load_regime_table(path) -> RegimeTable:
    """Load and validate a regime-config JSON document."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"regime config not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    return regime_table_from_dict(doc)


def regime_table_from_dict(doc) -> RegimeTable:
    if not isinstance(doc, dict) or "regimes" not in doc:
        raise DataError("regime config must be an object with a 'regimes' array")
    specs = [_regime_from_dict(o) for o in doc["regimes"]]
    specs.sort(key=lambda r: r.start)
    return RegimeTable(regimes=tuple(specs))


def regime_table_to_dict(table: RegimeTable) -> dict:
    out = []
    for r in table:
        entry = {
            "id": r.id,
            "start": str(r.start),
            "end": str(r.end),
            "labels": list(r.labels),
            "family": r.family,
        }
        if r.fixed_params is not None:
            entry["params"] = r.fixed_params
        out.append(entry)
    return {"regimes": out}


def default_regime_table() -> RegimeTable:
    """The ten bundled 1997-2013 regime windows with their copula families."""
    text = resources.files("copulafolio.data").joinpath("regimes_default.json").read_text()
    return regime_table_from_dict(json.loads(text))
