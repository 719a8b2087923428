from datetime import date

import pytest

from stratkit.data import DataSourceConfig
from stratkit.fixtures import F1_BENCHMARK, F1_UNIVERSE, f1_config, write_csv_fixture
from stratkit.registry import FilesystemStore, InMemoryStore
from stratkit.strategy import StrategyMeta, StrategyType

F1_START = date(2022, 1, 3)
F1_END = date(2022, 1, 7)


@pytest.fixture
def f1() -> DataSourceConfig:
    """In-memory F1 data source."""
    return f1_config()


@pytest.fixture(scope="session")
def f1_csv(tmp_path_factory) -> DataSourceConfig:
    """F1 materialized as a csv_dir source."""
    return write_csv_fixture(tmp_path_factory.mktemp("f1-data"))


@pytest.fixture
def alloc_meta() -> StrategyMeta:
    return StrategyMeta(tuple(F1_UNIVERSE), F1_BENCHMARK, StrategyType.ALLOCATION)


@pytest.fixture
def selection_meta() -> StrategyMeta:
    return StrategyMeta(tuple(F1_UNIVERSE), F1_BENCHMARK, StrategyType.SELECTION)


@pytest.fixture
def hedge_meta() -> StrategyMeta:
    return StrategyMeta(tuple(F1_UNIVERSE), F1_BENCHMARK, StrategyType.HEDGE)


@pytest.fixture
def mem_store() -> InMemoryStore:
    return InMemoryStore()


@pytest.fixture
def fs_store(tmp_path) -> FilesystemStore:
    return FilesystemStore(tmp_path / "store")
