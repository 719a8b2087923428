from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratkit.errors import DuplicateColumnError, OrderError, RangeError, ShapeError
from stratkit.timeseries import TimeSeriesDataset, concat_rows, make_dataset

D = lambda day: date(2022, 1, day)  # noqa: E731


def f1_prices() -> TimeSeriesDataset:
    return make_dataset(
        [D(3), D(4), D(5), D(6), D(7)],
        ["AAA", "BBB"],
        [
            [100.0, 100.0],
            [110.0, 100.0],
            [121.0, 90.0],
            [121.0, 99.0],
            [133.1, 99.0],
        ],
    )


class TestMakeDataset:
    def test_minimal_valid(self):
        ds = make_dataset([D(3)], ["AAA"], [[100.0]])
        assert ds.n_rows == 1 and ds.n_cols == 1
        assert ds.at(D(3), "AAA") == 100.0

    def test_unsorted_index_rejected(self):
        with pytest.raises(OrderError):
            make_dataset([D(4), D(3)], ["AAA"], [[1.0], [2.0]])

    def test_duplicate_index_rejected(self):
        with pytest.raises(OrderError):
            make_dataset([D(3), D(3)], ["AAA"], [[1.0], [2.0]])

    def test_duplicate_columns_rejected(self):
        with pytest.raises(DuplicateColumnError):
            make_dataset([D(3)], ["AAA", "AAA"], [[1.0, 2.0]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            make_dataset([D(3), D(4)], ["AAA"], [[1.0]])
        with pytest.raises(ShapeError):
            make_dataset([D(3)], ["AAA"], [[1.0, 2.0]])

    def test_values_immutable(self):
        ds = f1_prices()
        with pytest.raises(ValueError):
            ds.values[0, 0] = 0.0

    def test_input_order_preserved(self):
        ds = f1_prices()
        assert ds.columns == ("AAA", "BBB")
        assert ds.index[0] == D(3) and ds.index[-1] == D(7)

    def test_nan_cells_allowed(self):
        ds = make_dataset([D(3)], ["AAA"], [[float("nan")]])
        assert np.isnan(ds.values[0, 0])


class TestSplitByDate:
    def test_cutoff_goes_to_second_part(self):
        first, second = f1_prices().split_by_date(D(5))
        assert first.index == (D(3), D(4))
        assert second.index == (D(5), D(6), D(7))
        assert first.columns == second.columns == ("AAA", "BBB")

    def test_cutoff_before_first(self):
        ds = f1_prices()
        first, second = ds.split_by_date(D(1))
        assert first.n_rows == 0 and first.columns == ds.columns
        assert second == ds

    def test_cutoff_after_last(self):
        ds = f1_prices()
        first, second = ds.split_by_date(D(7) + timedelta(days=1))
        assert first == ds
        assert second.n_rows == 0 and second.columns == ds.columns


class TestSliceRange:
    def test_inclusive_bounds(self):
        # F1 calendar has exactly 01-04, 01-05, 01-06 inside the range
        assert f1_prices().slice_range(D(4), D(6)).n_rows == 3

    def test_single_date(self):
        ds = f1_prices().slice_range(D(5), D(5))
        assert ds.index == (D(5),)

    def test_reversed_range_rejected(self):
        with pytest.raises(RangeError):
            f1_prices().slice_range(D(6), D(4))

    def test_full_range_is_identity(self):
        ds = f1_prices()
        assert ds.slice_range(ds.index[0], ds.index[-1]) == ds


class TestAlign:
    def test_intersection(self):
        a = make_dataset([D(1), D(2), D(3)], ["X"], [[1.0], [2.0], [3.0]])
        b = make_dataset([D(2), D(3), D(4)], ["Y"], [[5.0], [6.0], [7.0]])
        a2, b2 = a.align(b)
        assert a2.index == b2.index == (D(2), D(3))
        assert a2.columns == ("X",) and b2.columns == ("Y",)
        assert list(a2.column("X")) == [2.0, 3.0]

    def test_equal_index_unchanged(self):
        ds = f1_prices()
        a2, b2 = ds.align(ds)
        assert a2 == ds and b2 == ds

    def test_disjoint(self):
        a = make_dataset([D(1)], ["X"], [[1.0]])
        b = make_dataset([D(2)], ["Y"], [[2.0]])
        a2, b2 = a.align(b)
        assert a2.n_rows == 0 and b2.n_rows == 0


# --- property tests over random datasets ---------------------------------------

_EPOCH = date(2020, 1, 1)


@st.composite
def datasets(draw, max_rows=100, max_cols=5):
    n_cols = draw(st.integers(1, max_cols))
    offsets = draw(
        st.sets(st.integers(0, 5000), min_size=0, max_size=max_rows)
    )
    index = [_EPOCH + timedelta(days=k) for k in sorted(offsets)]
    cell = st.one_of(
        st.floats(-1e6, 1e6, allow_nan=False), st.just(float("nan"))
    )
    values = [
        draw(st.lists(cell, min_size=n_cols, max_size=n_cols)) for _ in index
    ]
    cols = [f"c{i}" for i in range(n_cols)]
    return make_dataset(index, cols, np.array(values).reshape(len(index), n_cols))


@given(datasets(), st.integers(-10, 5010))
@settings(max_examples=60, deadline=None)
def test_split_parts_reassemble(ds, offset):
    cutoff = _EPOCH + timedelta(days=offset)
    first, second = ds.split_by_date(cutoff)
    assert concat_rows(first, second) == ds
    assert all(d < cutoff for d in first.index)
    assert all(d >= cutoff for d in second.index)


@given(datasets())
@settings(max_examples=60, deadline=None)
def test_slice_full_range_identity(ds):
    if ds.n_rows == 0:
        return
    assert ds.slice_range(ds.index[0], ds.index[-1]) == ds


@given(datasets(), datasets())
@settings(max_examples=60, deadline=None)
def test_align_is_index_intersection_and_idempotent(a, b):
    a2, b2 = a.align(b)
    expected = tuple(sorted(set(a.index) & set(b.index)))
    assert a2.index == expected and b2.index == expected
    a3, b3 = a2.align(b2)
    assert a3 == a2 and b3 == b2
    # commutative in the produced index
    b4, a4 = b.align(a)
    assert b4.index == a4.index == expected
