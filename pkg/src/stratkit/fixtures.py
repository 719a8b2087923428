"""Canonical in-repo data fixture used by tests, docs, and examples.

Fixture ``F1``: two investable assets (AAA, BBB) plus a benchmark index
(BMK) over the five trading days 2022-01-03 .. 2022-01-07.  It registers
itself as an in-memory source at import; ``write_csv_fixture`` materializes
the same data as a ``csv_dir`` source.
"""

from __future__ import annotations

import csv
from datetime import date
from pathlib import Path

from .data import (
    METADATA_FILENAME,
    METADATA_HEADER,
    PRICES_FILENAME,
    PRICES_HEADER,
    AssetMetadata,
    DataSourceConfig,
    register_fixture,
)

F1_ID = "F1"
F1_UNIVERSE = ["AAA", "BBB"]
F1_BENCHMARK = "BMK"
F1_DATES = [date(2022, 1, d) for d in (3, 4, 5, 6, 7)]

F1_CLOSES = {
    "AAA": [100.0, 110.0, 121.0, 121.0, 133.1],
    "BBB": [100.0, 100.0, 90.0, 99.0, 99.0],
    "BMK": [100.0, 105.0, 105.0, 110.25, 110.25],
}

F1_METADATA = [
    AssetMetadata("AAA", "Alpha Corp", "Tech", "Equity", "US"),
    AssetMetadata("BBB", "Beta Inc", "Energy", "Equity", "KR"),
    AssetMetadata("BMK", "Benchmark Index", "Index", "Index", "US"),
]


def f1_price_rows() -> list[tuple[date, str, float]]:
    rows = []
    for asset, closes in F1_CLOSES.items():
        for d, c in zip(F1_DATES, closes):
            rows.append((d, asset, c))
    return rows


def f1_config() -> DataSourceConfig:
    """Config pointing at the registered in-memory F1 source."""
    return DataSourceConfig(source_kind="in_memory_fixture", fixture_id=F1_ID)


def write_csv_fixture(dest_dir: str | Path, fixture_id: str = F1_ID) -> DataSourceConfig:
    """Materialize a registered fixture as prices.csv/metadata.csv in ``dest_dir``.

    Returns a csv_dir config pointing at the directory.
    """
    from .data import _FIXTURES  # internal registry; fixtures module is its curator

    if fixture_id not in _FIXTURES:
        raise KeyError(f"unknown fixture {fixture_id!r}")
    prices, metadata = _FIXTURES[fixture_id]
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    with open(dest / PRICES_FILENAME, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(PRICES_HEADER)
        for d, asset, close in sorted(prices):
            writer.writerow([d.isoformat(), asset, repr(close)])
    with open(dest / METADATA_FILENAME, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(METADATA_HEADER)
        for m in metadata:
            writer.writerow([m.asset_id, m.name, m.sector, m.category, m.country])
    return DataSourceConfig(source_kind="csv_dir", root=str(dest))


register_fixture(F1_ID, f1_price_rows(), F1_METADATA)
