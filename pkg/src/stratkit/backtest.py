"""Interface-driven backtesting engine.

The engine replays a strategy strictly through its public contract: the
universe/benchmark/horizon getters, the ``configs`` setter, ``reset``, and
``execute``.  It queries prices and metadata from the data source itself,
computes buy-and-hold period returns between rebalances, and evaluates
them horizontally (calendar buckets) and vertically (contribution
breakdown by asset, sector, category, or country).

Within a period, weights are fixed at the rebalance close.  That makes
per-period contributions exactly additive (sum_i w_i * r_i == R_k), and
growth-factor linking then makes cross-period contributions sum exactly
to the cumulative return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta

from .data import DataSourceConfig, load_metadata, load_prices
from .errors import (
    EmptyResultError,
    InsufficientDataError,
    InvalidIntervalError,
    MissingMetadataError,
    UnsupportedStrategyError,
)
from .strategy import Portfolio

REPORT_SCHEMA_VERSION = 1

FREQUENCIES = ("monthly", "quarterly", "yearly")
GROUPINGS = ("asset", "sector", "category", "country")


@dataclass(frozen=True)
class BacktestResult:
    """Replay output: one entry per period (d_k, d_{k+1}]."""

    strategy_id: str
    rebalance_dates: tuple[date, ...]
    period_returns: tuple[float, ...]
    benchmark_returns: tuple[float, ...]
    holdings: tuple[dict, ...]              # asset -> weight at each rebalance
    asset_period_returns: tuple[dict, ...]  # asset -> simple return over the period

    @property
    def n_periods(self) -> int:
        return len(self.period_returns)


@dataclass(frozen=True)
class Metrics:
    cumulative_return: float
    annualized_return: float
    annualized_volatility: float
    sharpe: float
    max_drawdown: float


def run_backtest(
    strategy,
    config: DataSourceConfig,
    start: date,
    end: date,
) -> BacktestResult:
    """Replay ``strategy`` over [start, end] on its rebalance schedule.

    The schedule is the strategy's valid dates subsampled at its horizon:
    the first valid date, then repeatedly the first valid date at least
    ``horizon_days`` calendar days after the previous rebalance.

    Raises:
        UnsupportedStrategyError: the strategy does not produce portfolios.
        InsufficientDataError: fewer than two schedule dates in range.
    """
    universe = list(strategy.universe)
    benchmark = strategy.benchmark
    horizon = strategy.horizon_days
    strategy.configs = config
    valid = strategy.reset(start, end)

    schedule: list[date] = []
    for d in valid:
        if not schedule or d >= schedule[-1] + timedelta(days=horizon):
            schedule.append(d)
    if len(schedule) < 2:
        raise InsufficientDataError(
            f"need at least 2 rebalance dates in [{start.isoformat()}, "
            f"{end.isoformat()}], got {len(schedule)}"
        )

    prices = load_prices(config, universe + [benchmark], start, end)

    def close(asset: str, d: date) -> float:
        try:
            return prices.at(d, asset)
        except KeyError:
            raise InsufficientDataError(
                f"no {asset} price on rebalance date {d.isoformat()}"
            ) from None

    period_returns: list[float] = []
    benchmark_returns: list[float] = []
    holdings: list[dict] = []
    asset_period_returns: list[dict] = []
    for d0, d1 in zip(schedule, schedule[1:]):
        outcome = strategy.execute(d0)
        content = outcome.content
        if not isinstance(content, Portfolio):
            raise UnsupportedStrategyError(
                f"backtest requires portfolio outcomes, got {type(content).__name__}"
            )
        weights = dict(content.weights)
        returns = {a: close(a, d1) / close(a, d0) - 1.0 for a in universe}
        period = 0.0
        for a in universe:
            period += weights.get(a, 0.0) * returns[a]
        period_returns.append(period)
        benchmark_returns.append(close(benchmark, d1) / close(benchmark, d0) - 1.0)
        holdings.append(weights)
        asset_period_returns.append(returns)

    return BacktestResult(
        strategy_id=strategy.strategy_id,
        rebalance_dates=tuple(schedule),
        period_returns=tuple(period_returns),
        benchmark_returns=tuple(benchmark_returns),
        holdings=tuple(holdings),
        asset_period_returns=tuple(asset_period_returns),
    )


# --- horizontal aggregation -----------------------------------------------------

def _bucket_label(d: date, frequency: str) -> str:
    if frequency == "monthly":
        return f"{d.year:04d}-{d.month:02d}"
    if frequency == "quarterly":
        return f"{d.year:04d}-Q{(d.month - 1) // 3 + 1}"
    if frequency == "yearly":
        return f"{d.year:04d}"
    raise ValueError(f"unknown frequency {frequency!r}")


def aggregate_horizontal(
    result: BacktestResult,
    frequency: str | None = None,
    interval_days: int | None = None,
) -> list[dict]:
    """Group periods into calendar buckets keyed by each period's end date.

    Exactly one of ``frequency`` and ``interval_days`` must be given.
    Bucket returns compound within the bucket; excess is the arithmetic
    difference against the identically bucketed benchmark.
    """
    if (frequency is None) == (interval_days is None):
        raise ValueError("give exactly one of frequency or interval_days")
    if interval_days is not None and interval_days < 1:
        raise InvalidIntervalError(f"interval_days must be >= 1, got {interval_days}")
    if frequency is not None and frequency not in FREQUENCIES:
        raise ValueError(f"frequency must be one of {FREQUENCIES}")
    if result.n_periods == 0:
        raise EmptyResultError("no periods to aggregate")

    ends = result.rebalance_dates[1:]
    labels: list[str] = []
    if interval_days is not None:
        first = ends[0]
        labels = [f"custom[{(d - first).days // interval_days}]" for d in ends]
    else:
        labels = [_bucket_label(d, frequency) for d in ends]

    rows: list[dict] = []
    for label, ret, bench in zip(labels, result.period_returns, result.benchmark_returns):
        if rows and rows[-1]["label"] == label:
            rows[-1]["return"] = (1.0 + rows[-1]["return"]) * (1.0 + ret) - 1.0
            rows[-1]["benchmark_return"] = (
                (1.0 + rows[-1]["benchmark_return"]) * (1.0 + bench) - 1.0
            )
        else:
            rows.append({"label": label, "return": ret, "benchmark_return": bench})
    for row in rows:
        row["excess"] = row["return"] - row["benchmark_return"]
    return rows


# --- vertical attribution ---------------------------------------------------------

def attribute_vertical(
    result: BacktestResult,
    grouping: str,
    metadata: list,
) -> list[dict]:
    """Break cumulative performance into per-group linked contributions.

    Per-period contribution of asset i is w_i * r_i; linking scales period
    k by the portfolio growth up to k, so contributions sum exactly to the
    cumulative return (telescoping identity).  Groups follow universe
    order of first appearance.
    """
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}")
    if result.n_periods == 0:
        raise EmptyResultError("no periods to attribute")

    meta_by_id = {m.asset_id: m for m in metadata}
    assets = list(result.asset_period_returns[0])
    held = {a for weights in result.holdings for a, w in weights.items() if w != 0.0}
    missing = sorted(a for a in held if a not in meta_by_id)
    if missing:
        raise MissingMetadataError(f"metadata does not cover held assets: {missing}")

    def group_of(asset: str) -> str:
        if grouping == "asset":
            return asset
        m = meta_by_id.get(asset)
        if m is None:
            raise MissingMetadataError(f"metadata does not cover asset {asset!r}")
        return getattr(m, grouping)

    # growth factor of the portfolio before each period
    prefix = [1.0]
    for r in result.period_returns[:-1]:
        prefix.append(prefix[-1] * (1.0 + r))

    linked: dict[str, float] = {a: 0.0 for a in assets}
    for k in range(result.n_periods):
        weights = result.holdings[k]
        returns = result.asset_period_returns[k]
        for a in assets:
            linked[a] += weights.get(a, 0.0) * returns[a] * prefix[k]

    rows: list[dict] = []
    row_of: dict[str, dict] = {}
    for a in assets:
        g = group_of(a)
        if g not in row_of:
            row_of[g] = {"group": g, "contribution": 0.0}
            rows.append(row_of[g])
        row_of[g]["contribution"] += linked[a]
    return rows


# --- summary metrics ----------------------------------------------------------------

def default_periods_per_year(horizon_days: int) -> float:
    """Annualization factor from the rebalance spacing."""
    return {1: 252.0, 7: 52.0, 30: 12.0, 90: 4.0, 365: 1.0}.get(
        horizon_days, 365.25 / horizon_days
    )


def compute_metrics(period_returns, periods_per_year: float) -> Metrics:
    """Cumulative/annualized return, volatility, Sharpe (rf = 0), drawdown.

    Sharpe and volatility are NaN when the return standard deviation is
    zero or undefined (fewer than two periods).
    """
    returns = list(period_returns)
    if not returns:
        raise EmptyResultError("metrics need at least one period")
    if periods_per_year <= 0:
        raise ValueError("periods_per_year must be positive")
    n = len(returns)

    cumulative = 1.0
    for r in returns:
        cumulative *= 1.0 + r
    cumulative -= 1.0
    annualized = (1.0 + cumulative) ** (periods_per_year / n) - 1.0

    if n < 2:
        std = math.nan
    else:
        mean = sum(returns) / n
        std = math.sqrt(sum((r - mean) ** 2 for r in returns) / (n - 1))
    volatility = std * math.sqrt(periods_per_year)
    if std == 0.0 or math.isnan(std):
        sharpe = math.nan
    else:
        sharpe = (sum(returns) / n) / std * math.sqrt(periods_per_year)

    wealth = 1.0
    peak = 1.0
    drawdown = 0.0
    for r in returns:
        wealth *= 1.0 + r
        peak = max(peak, wealth)
        drawdown = max(drawdown, (peak - wealth) / peak)

    return Metrics(
        cumulative_return=cumulative,
        annualized_return=annualized,
        annualized_volatility=volatility,
        sharpe=sharpe,
        max_drawdown=drawdown,
    )


# --- report assembly -----------------------------------------------------------------

def _json_real(x: float):
    """Reals for the report; non-finite values become JSON null."""
    return x if math.isfinite(x) else None


def build_report(
    strategy,
    config: DataSourceConfig,
    start: date,
    end: date,
    *,
    frequency: str = "monthly",
    interval_days: int | None = None,
    group_by: str = "asset",
    periods_per_year: float | None = None,
) -> dict:
    """Full backtest report object, in schema key order.

    ``interval_days`` (when given) takes the place of ``frequency``.
    """
    result = run_backtest(strategy, config, start, end)
    if interval_days is not None:
        horizontal = aggregate_horizontal(result, interval_days=interval_days)
    else:
        horizontal = aggregate_horizontal(result, frequency=frequency)
    metadata = load_metadata(config, list(strategy.universe))
    vertical = attribute_vertical(result, group_by, metadata)
    if periods_per_year is None:
        periods_per_year = default_periods_per_year(strategy.horizon_days)
    metrics = compute_metrics(result.period_returns, periods_per_year)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "strategy_id": result.strategy_id,
        "start": start.isoformat(),
        "end": end.isoformat(),
        "period_returns": [float(r) for r in result.period_returns],
        "benchmark_returns": [float(r) for r in result.benchmark_returns],
        "metrics": {
            "cumulative_return": _json_real(metrics.cumulative_return),
            "annualized_return": _json_real(metrics.annualized_return),
            "annualized_volatility": _json_real(metrics.annualized_volatility),
            "sharpe": _json_real(metrics.sharpe),
            "max_drawdown": _json_real(metrics.max_drawdown),
        },
        "horizontal": [
            {
                "label": row["label"],
                "return": row["return"],
                "benchmark_return": row["benchmark_return"],
                "excess": row["excess"],
            }
            for row in horizontal
        ],
        "vertical": [
            {"group": row["group"], "contribution": row["contribution"]}
            for row in vertical
        ],
    }
