"""Date-indexed dataset type and its date-based operations.

``TimeSeriesDataset`` is the unit exchanged between data pipelines and
algorithms: a strictly increasing calendar-date index, named float64
columns, and a row-major value matrix.  Missing cells are encoded as NaN.
All operations are pure; instances are immutable after construction.
"""

from __future__ import annotations

import bisect
from datetime import date
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateColumnError, OrderError, RangeError, ShapeError


class TimeSeriesDataset:
    """Immutable matrix of float64 values indexed by trading date.

    Invariants enforced at construction:
      * index strictly increasing (no duplicate dates)
      * one row per index entry, one value per column in every row
      * column names unique and non-empty
    """

    __slots__ = ("_index", "_columns", "_values", "_positions")

    def __init__(
        self,
        index: Iterable[date],
        columns: Iterable[str],
        values: Sequence[Sequence[float]] | np.ndarray,
    ):
        idx = tuple(index)
        cols = tuple(columns)
        for i in range(1, len(idx)):
            if idx[i] <= idx[i - 1]:
                raise OrderError(
                    f"index not strictly increasing at position {i}: "
                    f"{idx[i - 1]} !< {idx[i]}"
                )
        if len(set(cols)) != len(cols):
            seen: set[str] = set()
            dupes: set[str] = set()
            for c in cols:
                if c in seen:
                    dupes.add(c)
                seen.add(c)
            raise DuplicateColumnError(f"duplicate column names: {sorted(dupes)}")
        if any(not c for c in cols):
            raise DuplicateColumnError("column names must be non-empty strings")

        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, len(cols))  # accept [] for a zero-row matrix
        if arr.ndim != 2:
            raise ShapeError(f"values must be a 2-d matrix, got ndim={arr.ndim}")
        if arr.shape != (len(idx), len(cols)):
            raise ShapeError(
                f"values shape {arr.shape} does not match "
                f"{len(idx)} rows x {len(cols)} columns"
            )
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self._index = idx
        self._columns = cols
        self._values = arr
        self._positions = {d: i for i, d in enumerate(idx)}

    # -- accessors -----------------------------------------------------------

    @property
    def index(self) -> tuple[date, ...]:
        return self._index

    @property
    def columns(self) -> tuple[str, ...]:
        return self._columns

    @property
    def values(self) -> np.ndarray:
        """Read-only (n_rows, n_cols) float64 matrix."""
        return self._values

    @property
    def n_rows(self) -> int:
        return len(self._index)

    @property
    def n_cols(self) -> int:
        return len(self._columns)

    def column(self, name: str) -> np.ndarray:
        """Values of one column, in index order."""
        try:
            j = self._columns.index(name)
        except ValueError:
            raise KeyError(f"no column named {name!r}") from None
        return self._values[:, j]

    def at(self, d: date, column: str) -> float:
        """Single cell lookup by date and column name."""
        try:
            i = self._positions[d]
        except KeyError:
            raise KeyError(f"no row for date {d.isoformat()}") from None
        return float(self.column(column)[i])

    def __len__(self) -> int:
        return len(self._index)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeriesDataset):
            return NotImplemented
        return (
            self._index == other._index
            and self._columns == other._columns
            and np.array_equal(self._values, other._values, equal_nan=True)
        )

    def __repr__(self) -> str:
        span = ""
        if self._index:
            span = f" {self._index[0].isoformat()}..{self._index[-1].isoformat()}"
        return (
            f"TimeSeriesDataset({self.n_rows}x{self.n_cols}{span}, "
            f"columns={list(self._columns)})"
        )

    # -- date-based operations -------------------------------------------------

    def split_by_date(self, cutoff: date) -> tuple["TimeSeriesDataset", "TimeSeriesDataset"]:
        """Split rows at ``cutoff``: dates before it vs. dates on/after it.

        The cutoff date itself belongs to the second part, matching the
        train-before / test-from convention.  Either part may be empty.
        """
        k = bisect.bisect_left(self._index, cutoff)
        return self._take_rows(slice(0, k)), self._take_rows(slice(k, len(self._index)))

    def slice_range(self, start: date, end: date) -> "TimeSeriesDataset":
        """Rows with start <= date <= end, both ends inclusive.

        Raises:
            RangeError: if start > end.
        """
        if start > end:
            raise RangeError(f"start {start.isoformat()} is after end {end.isoformat()}")
        lo = bisect.bisect_left(self._index, start)
        hi = bisect.bisect_right(self._index, end)
        return self._take_rows(slice(lo, hi))

    def align(self, other: "TimeSeriesDataset") -> tuple["TimeSeriesDataset", "TimeSeriesDataset"]:
        """Restrict both datasets to the sorted intersection of their indices.

        Columns of each dataset are unchanged; a disjoint pair yields two
        zero-row datasets.
        """
        common = sorted(set(self._index) & set(other._index))
        return self._take_dates(common), other._take_dates(common)

    # -- internal helpers --------------------------------------------------------

    def _take_rows(self, rows: slice) -> "TimeSeriesDataset":
        return TimeSeriesDataset(self._index[rows], self._columns, self._values[rows])

    def _take_dates(self, dates: Sequence[date]) -> "TimeSeriesDataset":
        if not dates:
            empty = np.empty((0, self.n_cols), dtype=np.float64)
            return TimeSeriesDataset((), self._columns, empty)
        pos = [self._positions[d] for d in dates]
        return TimeSeriesDataset(tuple(dates), self._columns, self._values[pos])


def make_dataset(
    index: Iterable[date],
    columns: Iterable[str],
    values: Sequence[Sequence[float]] | np.ndarray,
) -> TimeSeriesDataset:
    """Validate and build a dataset; input order is preserved."""
    return TimeSeriesDataset(index, columns, values)


def concat_rows(first: TimeSeriesDataset, second: TimeSeriesDataset) -> TimeSeriesDataset:
    """Stack two datasets with identical columns row-wise."""
    if first.columns != second.columns:
        raise ShapeError("cannot concatenate datasets with differing columns")
    return TimeSeriesDataset(
        first.index + second.index,
        first.columns,
        np.vstack([first.values, second.values]),
    )
