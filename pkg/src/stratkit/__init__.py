"""Unified investment-strategy platform core.

Dataset, algorithm, and strategy interfaces; a key-value artifact
registry; a DAG pipeline runner for the train/inference lifecycle; and an
interface-driven backtesting engine.
"""

from . import fixtures  # noqa: F401  — registers the canonical F1 data source
from .algorithm import (
    AlgorithmManifest,
    EpsilonGreedyBandit,
    OLSRegressor,
    StandardScaler,
    load_algorithm,
    rl_train,
    save_algorithm,
)
from .backtest import (
    BacktestResult,
    Metrics,
    aggregate_horizontal,
    attribute_vertical,
    build_report,
    compute_metrics,
    run_backtest,
)
from .data import (
    AssetMetadata,
    DataPipelineSpec,
    DataSourceConfig,
    generate,
    load_metadata,
    load_prices,
)
from .pipeline import (
    PipelineDag,
    RunReport,
    TaskSpec,
    build_inference_pipeline,
    build_train_pipeline,
    run_dag,
    validate_dag,
)
from .registry import (
    FilesystemStore,
    InMemoryStore,
    list_strategies,
    load_strategy,
    save_outcome,
    save_strategy,
)
from .strategy import (
    Outcome,
    Portfolio,
    Rank,
    Signal,
    StrategyMeta,
    StrategyType,
    new_strategy,
)
from .timeseries import TimeSeriesDataset, make_dataset

__version__ = "0.1.0"
