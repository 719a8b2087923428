"""Data loading and the data-pipeline contract.

A ``DataSourceConfig`` points at a price/metadata source (a CSV directory
or a registered in-memory fixture).  ``load_prices`` / ``load_metadata``
hide the storage layout from callers; ``generate`` runs a registered,
serializable data pipeline and always emits a ``TimeSeriesDataset``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    MissingConfigError,
    SourceError,
    UnknownAssetError,
    UnknownKindError,
)
from .timeseries import TimeSeriesDataset

PRICES_FILENAME = "prices.csv"
METADATA_FILENAME = "metadata.csv"
PRICES_HEADER = ["date", "asset_id", "close"]
METADATA_HEADER = ["asset_id", "name", "sector", "category", "country"]

SOURCE_KINDS = ("csv_dir", "in_memory_fixture")


@dataclass(frozen=True)
class DataSourceConfig:
    """Pointer to a price/metadata source; immutable once constructed."""

    source_kind: str
    root: str | None = None
    fixture_id: str | None = None

    def __post_init__(self):
        if self.source_kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source_kind {self.source_kind!r}")
        if self.source_kind == "csv_dir" and (self.root is None or self.fixture_id is not None):
            raise ValueError("csv_dir config requires root and must not set fixture_id")
        if self.source_kind == "in_memory_fixture" and (
            self.fixture_id is None or self.root is not None
        ):
            raise ValueError("in_memory_fixture config requires fixture_id and must not set root")


@dataclass(frozen=True)
class AssetMetadata:
    asset_id: str
    name: str
    sector: str
    category: str
    country: str

    def __post_init__(self):
        if not self.asset_id:
            raise ValueError("asset_id must be non-empty")


@dataclass(frozen=True)
class DataPipelineSpec:
    """Serializable description of a data pipeline: registered name + params.

    Pipelines are referred to by name so they can travel inside strategy
    manifests; ``params`` values must be JSON scalars.
    """

    pipeline_kind: str
    params: dict = field(default_factory=dict)
    required_fields: tuple[str, ...] = ("close",)

    def __post_init__(self):
        if self.pipeline_kind not in _PIPELINES:
            raise UnknownKindError(f"unregistered pipeline kind {self.pipeline_kind!r}")
        lookback = self.params.get("lookback_days", 0)
        if not isinstance(lookback, int) or lookback < 0:
            raise ValueError("lookback_days must be an integer >= 0")
        if tuple(self.required_fields) != ("close",):
            raise ValueError("only the 'close' price field is supported")

    def to_json_dict(self) -> dict:
        return {
            "pipeline_kind": self.pipeline_kind,
            "params": dict(self.params),
            "required_fields": list(self.required_fields),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DataPipelineSpec":
        return cls(
            pipeline_kind=obj["pipeline_kind"],
            params=dict(obj.get("params", {})),
            required_fields=tuple(obj.get("required_fields", ("close",))),
        )

    @property
    def lookback_days(self) -> int:
        return int(self.params.get("lookback_days", 0))


# --- raw source access --------------------------------------------------------

# fixture_id -> (price rows [(date, asset_id, close)], metadata rows [AssetMetadata])
_FIXTURES: dict[str, tuple[list[tuple[date, str, float]], list[AssetMetadata]]] = {}


def register_fixture(
    fixture_id: str,
    prices: list[tuple[date, str, float]],
    metadata: list[AssetMetadata],
) -> None:
    """Register an in-memory data source under ``fixture_id``."""
    _FIXTURES[fixture_id] = (list(prices), list(metadata))


def _read_price_rows(config: DataSourceConfig) -> list[tuple[date, str, float]]:
    if config.source_kind == "in_memory_fixture":
        if config.fixture_id not in _FIXTURES:
            raise SourceError(f"unknown fixture {config.fixture_id!r}")
        return _FIXTURES[config.fixture_id][0]
    path = Path(config.root) / PRICES_FILENAME
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != PRICES_HEADER:
                raise SourceError(f"{path}: expected header {','.join(PRICES_HEADER)!r}")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise SourceError(f"{path}:{lineno}: expected 3 fields")
                try:
                    rows.append((date.fromisoformat(row[0]), row[1], float(row[2])))
                except ValueError as e:
                    raise SourceError(f"{path}:{lineno}: {e}") from e
    except OSError as e:
        raise SourceError(f"cannot read {path}: {e}") from e
    return rows


def _read_metadata_rows(config: DataSourceConfig) -> list[AssetMetadata]:
    if config.source_kind == "in_memory_fixture":
        if config.fixture_id not in _FIXTURES:
            raise SourceError(f"unknown fixture {config.fixture_id!r}")
        return _FIXTURES[config.fixture_id][1]
    path = Path(config.root) / METADATA_FILENAME
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != METADATA_HEADER:
                raise SourceError(f"{path}: expected header {','.join(METADATA_HEADER)!r}")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 5:
                    raise SourceError(f"{path}:{lineno}: expected 5 fields")
                rows.append(AssetMetadata(*row))
    except OSError as e:
        raise SourceError(f"cannot read {path}: {e}") from e
    return rows


# --- loader operations --------------------------------------------------------

def load_prices(
    config: DataSourceConfig,
    universe: list[str],
    start: date,
    end: date,
) -> TimeSeriesDataset:
    """Close prices for ``universe``, one column per asset in universe order.

    The index is the intersection calendar: dates within [start, end] on
    which every requested asset has a price.  Callers never see the
    storage layout.

    Raises:
        UnknownAssetError: an asset has no rows in the source at all.
        SourceError: the source is unreadable or malformed.
    """
    if not universe:
        raise ValueError("universe must be non-empty")
    rows = _read_price_rows(config)
    series: dict[str, dict[date, float]] = {a: {} for a in universe}
    wanted = set(universe)
    for d, asset, close in rows:
        if asset not in wanted:
            continue
        per_asset = series[asset]
        if d in per_asset:
            raise SourceError(f"duplicate price row for {asset} on {d.isoformat()}")
        per_asset[d] = close
    for asset, per_asset in series.items():
        if not per_asset:
            raise UnknownAssetError(f"asset {asset!r} not present in source")
    calendar: set[date] | None = None
    for per_asset in series.values():
        dates = {d for d in per_asset if start <= d <= end}
        calendar = dates if calendar is None else calendar & dates
    index = sorted(calendar or ())
    values = np.array(
        [[series[a][d] for a in universe] for d in index], dtype=np.float64
    ).reshape(len(index), len(universe))
    return TimeSeriesDataset(index, universe, values)


def load_metadata(config: DataSourceConfig, universe: list[str]) -> list[AssetMetadata]:
    """One metadata record per universe asset, in universe order."""
    rows = _read_metadata_rows(config)
    by_id: dict[str, AssetMetadata] = {}
    for m in rows:
        if m.asset_id in by_id:
            raise SourceError(f"duplicate metadata row for {m.asset_id!r}")
        by_id[m.asset_id] = m
    missing = [a for a in universe if a not in by_id]
    if missing:
        raise UnknownAssetError(f"no metadata for assets: {missing}")
    return [by_id[a] for a in universe]


def price_calendar(
    config: DataSourceConfig, universe: list[str], start: date, end: date
) -> list[date]:
    """The intersection calendar used by ``load_prices``, as a date list."""
    return list(load_prices(config, universe, start, end).index)


# --- pipeline registry and reference pipelines ---------------------------------

PipelineFn = Callable[[DataPipelineSpec, TimeSeriesDataset], TimeSeriesDataset]

_PIPELINES: dict[str, PipelineFn] = {}


def register_pipeline(name: str, fn: PipelineFn) -> None:
    _PIPELINES[name] = fn


def generate(
    spec: DataPipelineSpec,
    config: DataSourceConfig | None,
    universe: list[str],
    start: date,
    end: date,
) -> TimeSeriesDataset:
    """Run a registered pipeline over prices loaded from ``config``.

    Raises:
        MissingConfigError: no config has been assigned.
    """
    if config is None:
        raise MissingConfigError(
            f"pipeline {spec.pipeline_kind!r} has no data-source config assigned"
        )
    fn = _PIPELINES.get(spec.pipeline_kind)
    if fn is None:
        raise UnknownKindError(f"unregistered pipeline kind {spec.pipeline_kind!r}")
    closes = load_prices(config, universe, start, end)
    return fn(spec, closes)


def _close_prices(spec: DataPipelineSpec, closes: TimeSeriesDataset) -> TimeSeriesDataset:
    return closes


def _simple_returns(spec: DataPipelineSpec, closes: TimeSeriesDataset) -> TimeSeriesDataset:
    """Per-asset simple returns close_t / close_{t-1} - 1; drops the first row."""
    v = closes.values
    if len(closes) < 2:
        return TimeSeriesDataset((), closes.columns, np.empty((0, closes.n_cols)))
    returns = v[1:] / v[:-1] - 1.0
    return TimeSeriesDataset(closes.index[1:], closes.columns, returns)


def _trailing_return(spec: DataPipelineSpec, closes: TimeSeriesDataset) -> TimeSeriesDataset:
    """Per-asset return over the trailing ``lookback_days`` trading days.

    Row t holds close_t / close_{t-lookback} - 1; the first ``lookback``
    rows of the calendar are consumed as warm-up.
    """
    lb = spec.lookback_days
    v = closes.values
    if len(closes) <= lb:
        return TimeSeriesDataset((), closes.columns, np.empty((0, closes.n_cols)))
    if lb == 0:
        returns = np.zeros_like(v)
        return TimeSeriesDataset(closes.index, closes.columns, returns)
    returns = v[lb:] / v[:-lb] - 1.0
    return TimeSeriesDataset(closes.index[lb:], closes.columns, returns)


register_pipeline("close_prices", _close_prices)
register_pipeline("simple_returns", _simple_returns)
register_pipeline("trailing_return", _trailing_return)


# --- dataset serialization (store artifacts) ------------------------------------

def dataset_to_json_dict(ds: TimeSeriesDataset) -> dict:
    """JSON form of a dataset; NaN cells become null."""
    rows = [[None if np.isnan(x) else float(x) for x in row] for row in ds.values]
    return {
        "index": [d.isoformat() for d in ds.index],
        "columns": list(ds.columns),
        "values": rows,
    }


def dataset_from_json_dict(obj: dict) -> TimeSeriesDataset:
    index = [date.fromisoformat(s) for s in obj["index"]]
    values = [
        [np.nan if x is None else float(x) for x in row] for row in obj["values"]
    ]
    arr = np.array(values, dtype=np.float64).reshape(len(index), len(obj["columns"]))
    return TimeSeriesDataset(index, obj["columns"], arr)
