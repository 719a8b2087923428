import csv
from datetime import date

import pytest

from stratkit.data import (
    DataPipelineSpec,
    DataSourceConfig,
    generate,
    load_metadata,
    load_prices,
    dataset_from_json_dict,
    dataset_to_json_dict,
)
from stratkit.errors import (
    MissingConfigError,
    SourceError,
    UnknownAssetError,
    UnknownKindError,
)
from stratkit.fixtures import F1_CLOSES, F1_DATES

D = lambda day: date(2022, 1, day)  # noqa: E731
START, END = D(3), D(7)


class TestConfig:
    def test_kind_fields_enforced(self):
        DataSourceConfig(source_kind="csv_dir", root="/tmp/x")
        DataSourceConfig(source_kind="in_memory_fixture", fixture_id="F1")
        with pytest.raises(ValueError):
            DataSourceConfig(source_kind="csv_dir")
        with pytest.raises(ValueError):
            DataSourceConfig(source_kind="in_memory_fixture", fixture_id="F1", root="/x")
        with pytest.raises(ValueError):
            DataSourceConfig(source_kind="sql")


class TestLoadPrices:
    def test_full_fixture(self, f1):
        ds = load_prices(f1, ["AAA", "BBB"], START, END)
        assert ds.n_rows == 5 and ds.columns == ("AAA", "BBB")
        assert ds.values[0, 0] == 100.0  # first AAA close, read from fixture table
        assert list(ds.column("AAA")) == F1_CLOSES["AAA"]
        assert list(ds.column("BBB")) == F1_CLOSES["BBB"]

    def test_single_day_single_asset(self, f1):
        ds = load_prices(f1, ["AAA"], D(5), D(5))
        assert ds.n_rows == 1 and ds.at(D(5), "AAA") == 121.0

    def test_unknown_asset(self, f1):
        with pytest.raises(UnknownAssetError):
            load_prices(f1, ["ZZZ"], START, END)

    def test_columns_permute_with_universe(self, f1):
        ab = load_prices(f1, ["AAA", "BBB"], START, END)
        ba = load_prices(f1, ["BBB", "AAA"], START, END)
        assert ab.index == ba.index
        assert list(ab.column("AAA")) == list(ba.column("AAA"))

    def test_csv_source_matches_in_memory(self, f1, f1_csv):
        assert load_prices(f1_csv, ["AAA", "BBB"], START, END) == load_prices(
            f1, ["AAA", "BBB"], START, END
        )

    def test_intersection_calendar_drops_partial_dates(self, tmp_path):
        # BBB is missing on 01-04: that date must vanish from the joint calendar
        path = tmp_path / "prices.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["date", "asset_id", "close"])
            for row in [
                ("2022-01-03", "AAA", "1.0"),
                ("2022-01-04", "AAA", "2.0"),
                ("2022-01-03", "BBB", "3.0"),
            ]:
                w.writerow(row)
        (tmp_path / "metadata.csv").write_text("asset_id,name,sector,category,country\n")
        config = DataSourceConfig(source_kind="csv_dir", root=str(tmp_path))
        ds = load_prices(config, ["AAA", "BBB"], D(3), D(7))
        assert ds.index == (D(3),)

    def test_missing_file_is_source_error(self, tmp_path):
        config = DataSourceConfig(source_kind="csv_dir", root=str(tmp_path / "nope"))
        with pytest.raises(SourceError):
            load_prices(config, ["AAA"], START, END)

    def test_bad_header_is_source_error(self, tmp_path):
        (tmp_path / "prices.csv").write_text("date,asset,price\n")
        config = DataSourceConfig(source_kind="csv_dir", root=str(tmp_path))
        with pytest.raises(SourceError):
            load_prices(config, ["AAA"], START, END)

    def test_unknown_fixture_is_source_error(self):
        config = DataSourceConfig(source_kind="in_memory_fixture", fixture_id="nope")
        with pytest.raises(SourceError):
            load_prices(config, ["AAA"], START, END)


class TestLoadMetadata:
    def test_fixture_records(self, f1):
        records = load_metadata(f1, ["AAA"])
        assert records[0].sector == "Tech" and records[0].country == "US"

    def test_universe_order(self, f1):
        records = load_metadata(f1, ["BBB", "AAA"])
        assert [m.asset_id for m in records] == ["BBB", "AAA"]

    def test_empty_universe(self, f1):
        assert load_metadata(f1, []) == []

    def test_unknown_asset(self, f1):
        with pytest.raises(UnknownAssetError):
            load_metadata(f1, ["AAA", "ZZZ"])

    def test_csv_matches_in_memory(self, f1, f1_csv):
        assert load_metadata(f1_csv, ["AAA", "BBB"]) == load_metadata(f1, ["AAA", "BBB"])


class TestGenerate:
    def test_simple_returns_against_hand_arithmetic(self, f1):
        spec = DataPipelineSpec("simple_returns")
        ds = generate(spec, f1, ["AAA"], START, END)
        assert ds.index == tuple(F1_DATES[1:])
        closes = F1_CLOSES["AAA"]
        expected = [closes[i] / closes[i - 1] - 1.0 for i in range(1, 5)]
        assert list(ds.column("AAA")) == expected
        assert expected == pytest.approx([0.10, 0.10, 0.0, 0.10], abs=1e-12)

    def test_trailing_return_lookback_two(self, f1):
        spec = DataPipelineSpec("trailing_return", {"lookback_days": 2})
        ds = generate(spec, f1, ["AAA", "BBB"], START, END)
        assert ds.index[0] == D(5)
        assert ds.at(D(5), "AAA") == pytest.approx(0.21, abs=1e-12)  # 121/100 - 1
        assert ds.at(D(5), "BBB") == pytest.approx(-0.10, abs=1e-12)  # 90/100 - 1

    def test_missing_config(self):
        spec = DataPipelineSpec("simple_returns")
        with pytest.raises(MissingConfigError):
            generate(spec, None, ["AAA"], START, END)

    def test_unregistered_kind_rejected(self):
        with pytest.raises(UnknownKindError):
            DataPipelineSpec("no_such_pipeline")

    def test_pure_given_source(self, f1):
        spec = DataPipelineSpec("trailing_return", {"lookback_days": 1})
        assert generate(spec, f1, ["AAA", "BBB"], START, END) == generate(
            spec, f1, ["AAA", "BBB"], START, END
        )

    def test_returns_reconstruct_prices(self, f1):
        spec = DataPipelineSpec("simple_returns")
        ds = generate(spec, f1, ["AAA", "BBB"], START, END)
        for asset in ("AAA", "BBB"):
            price = F1_CLOSES[asset][0]
            rebuilt = [price]
            for r in ds.column(asset):
                rebuilt.append(rebuilt[-1] * (1.0 + r))
            assert rebuilt == pytest.approx(F1_CLOSES[asset], abs=1e-9)

    def test_simple_returns_row_count(self, f1):
        ds = generate(DataPipelineSpec("simple_returns"), f1, ["AAA"], START, END)
        assert ds.n_rows == 5 - 1


def test_dataset_json_roundtrip(f1):
    ds = load_prices(f1, ["AAA", "BBB"], START, END)
    assert dataset_from_json_dict(dataset_to_json_dict(ds)) == ds
