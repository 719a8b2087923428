"""Investment-strategy interface hierarchy and reference strategies.

Three levels mirror how much infrastructure a strategy needs:

* ``BaseStrategy``   — metadata constructor contract plus the
  reset/execute lifecycle,
* ``DPStrategy``     — adds data pipelines and the ``configs`` setter for
  the data source,
* ``MLStrategy``     — adds owned algorithms and fit hooks.

Every execution yields an ``Outcome`` whose content variant is fixed by
the strategy type: Allocation -> Portfolio, Selection -> Rank,
Hedge -> Signal.
"""

from __future__ import annotations

import bisect
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import ClassVar, Sequence

from .algorithm import OLSRegressor
from .data import DataPipelineSpec, DataSourceConfig, generate, price_calendar
from .errors import (
    BenchmarkInUniverseError,
    EmptyUniverseError,
    InvalidDateError,
    MissingAlgorithmError,
    MissingConfigError,
    NotResetError,
    RangeError,
    UnknownKindError,
)
from .timeseries import TimeSeriesDataset

OUTCOME_SCHEMA_VERSION = 1

WEIGHT_DECIMALS = 12  # archival precision of portfolio weights


class StrategyType(str, Enum):
    ALLOCATION = "Allocation"
    SELECTION = "Selection"
    HEDGE = "Hedge"


@dataclass(frozen=True)
class StrategyMeta:
    """Universe, benchmark, and strategy type; echoed verbatim by getters."""

    universe: tuple[str, ...]
    benchmark: str
    strategy_type: StrategyType

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "strategy_type", StrategyType(self.strategy_type))
        if not self.universe:
            raise EmptyUniverseError("universe must be non-empty")
        if len(set(self.universe)) != len(self.universe):
            raise EmptyUniverseError(f"universe contains duplicates: {list(self.universe)}")
        if self.benchmark in self.universe:
            raise BenchmarkInUniverseError(
                f"benchmark {self.benchmark!r} must not be in the universe"
            )


# --- outcome content variants --------------------------------------------------

@dataclass(frozen=True)
class Portfolio:
    """Long-only weights over (a subset of) the universe, summing to 1."""

    weights: dict

    def __post_init__(self):
        for asset, w in self.weights.items():
            if w < 0:
                raise ValueError(f"negative weight {w} for {asset!r}")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total}, expected 1 within 1e-9")


@dataclass(frozen=True)
class Rank:
    """All universe assets ordered by descending score, ties by asset id."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple((a, float(s)) for a, s in self.entries)
        )
        expected = sorted(self.entries, key=lambda e: (-e[1], e[0]))
        if list(self.entries) != expected:
            raise ValueError("rank entries not in (descending score, ascending id) order")


@dataclass(frozen=True)
class Signal:
    """Per-asset directional signal bounded to [-1, 1]."""

    values: dict

    def __post_init__(self):
        for asset, v in self.values.items():
            if not -1.0 <= v <= 1.0:
                raise ValueError(f"signal {v} for {asset!r} outside [-1, 1]")


CONTENT_TYPES = {
    StrategyType.ALLOCATION: (Portfolio, "portfolio"),
    StrategyType.SELECTION: (Rank, "rank"),
    StrategyType.HEDGE: (Signal, "signal"),
}


@dataclass(frozen=True)
class Outcome:
    """Dated result of one strategy execution."""

    strategy_id: str
    as_of: date
    horizon_days: int
    content: Portfolio | Rank | Signal


@dataclass(frozen=True)
class ResetState:
    start: date
    end: date
    valid_dates: tuple[date, ...]


# --- strategy kind registry ------------------------------------------------------

_STRATEGIES: dict[str, type] = {}


def register_strategy(cls):
    """Class decorator: make ``cls`` constructible by its ``kind`` name."""
    _STRATEGIES[cls.kind] = cls
    return cls


def strategy_class(kind: str) -> type:
    cls = _STRATEGIES.get(kind)
    if cls is None:
        raise UnknownKindError(f"unregistered strategy kind {kind!r}")
    return cls


def strategy_kinds() -> list[str]:
    return sorted(_STRATEGIES)


def new_strategy(
    kind: str,
    meta: StrategyMeta,
    *,
    pipelines: Sequence[DataPipelineSpec] | None = None,
    algorithms: Sequence | None = None,
    params: dict | None = None,
):
    """Construct a registered strategy; getters echo the constructor values."""
    cls = strategy_class(kind)
    kwargs = dict(params or {})
    if pipelines is not None:
        kwargs["pipelines"] = list(pipelines)
    if algorithms is not None:
        kwargs["algorithms"] = list(algorithms)
    return cls(meta, **kwargs)


# --- interface hierarchy ----------------------------------------------------------

class BaseStrategy(ABC):
    """Metadata contract plus the reset/execute lifecycle.

    ``reset`` fixes the date range and returns the valid execution dates;
    ``execute`` may then be called with any of them.  Subclasses provide
    the valid-date calendar and the outcome content.
    """

    kind: ClassVar[str] = "base"

    def __init__(self, meta: StrategyMeta, *, horizon_days: int = 1,
                 lookback_days: int = 0, rng_seed: int = 0):
        if horizon_days < 1:
            raise ValueError("horizon_days must be >= 1")
        if lookback_days < 0:
            raise ValueError("lookback_days must be >= 0")
        self._meta = meta
        self._horizon_days = int(horizon_days)
        self._lookback_days = int(lookback_days)
        self._rng_seed = int(rng_seed)
        self._reset_state: ResetState | None = None
        self.strategy_id = ""  # assigned on first save

    # getters echo constructor values
    @property
    def universe(self) -> tuple[str, ...]:
        return self._meta.universe

    @property
    def benchmark(self) -> str:
        return self._meta.benchmark

    @property
    def strategy_type(self) -> StrategyType:
        return self._meta.strategy_type

    @property
    def meta(self) -> StrategyMeta:
        return self._meta

    @property
    def horizon_days(self) -> int:
        return self._horizon_days

    @property
    def lookback_days(self) -> int:
        return self._lookback_days

    @property
    def rng_seed(self) -> int:
        return self._rng_seed

    @property
    def reset_state(self) -> ResetState | None:
        return self._reset_state

    def params(self) -> dict:
        """Kind-specific constructor parameters (manifest payload)."""
        return {}

    # lifecycle
    def reset(self, start: date, end: date) -> list[date]:
        """Set the execution date range; returns the valid dates, ascending."""
        if start > end:
            raise RangeError(f"start {start.isoformat()} is after end {end.isoformat()}")
        valid = tuple(self._valid_dates(start, end))
        self._reset_state = ResetState(start, end, valid)
        return list(valid)

    def execute(self, as_of: date) -> Outcome:
        """Run the strategy for one valid date; never reads data past it."""
        state = self._reset_state
        if state is None:
            raise NotResetError(f"{self.kind}: execute called before reset")
        if as_of not in state.valid_dates:
            raise InvalidDateError(
                f"{as_of.isoformat()} is not a valid execution date for {self.kind}"
            )
        content = self._execute(as_of)
        return self._make_outcome(as_of, content)

    @abstractmethod
    def _valid_dates(self, start: date, end: date) -> list[date]:
        ...

    @abstractmethod
    def _execute(self, as_of: date) -> Portfolio | Rank | Signal:
        ...

    def _make_outcome(self, as_of: date, content) -> Outcome:
        expected_cls, _ = CONTENT_TYPES[self.strategy_type]
        if not isinstance(content, expected_cls):
            raise TypeError(
                f"{self.kind} is {self.strategy_type.value} and must produce "
                f"{expected_cls.__name__}, got {type(content).__name__}"
            )
        if isinstance(content, Portfolio):
            stray = set(content.weights) - set(self.universe)
            if stray:
                raise ValueError(f"portfolio holds assets outside the universe: {sorted(stray)}")
        elif isinstance(content, Rank):
            if {a for a, _ in content.entries} != set(self.universe):
                raise ValueError("rank must cover each universe asset exactly once")
        elif isinstance(content, Signal):
            stray = set(content.values) - set(self.universe)
            if stray:
                raise ValueError(f"signal covers assets outside the universe: {sorted(stray)}")
        return Outcome(
            strategy_id=self.strategy_id,
            as_of=as_of,
            horizon_days=self.horizon_days,
            content=content,
        )


class DPStrategy(BaseStrategy):
    """Strategy fed by data pipelines; requires configs before reset."""

    def __init__(self, meta: StrategyMeta, *, pipelines: Sequence[DataPipelineSpec],
                 **kwargs):
        super().__init__(meta, **kwargs)
        self._pipelines = list(pipelines)
        if not self._pipelines:
            raise ValueError(f"{self.kind}: a DP-level strategy needs at least one pipeline")
        self._configs: DataSourceConfig | None = None

    @property
    def pipelines(self) -> list[DataPipelineSpec]:
        return list(self._pipelines)

    @property
    def configs(self) -> DataSourceConfig | None:
        return self._configs

    @configs.setter
    def configs(self, config: DataSourceConfig) -> None:
        # propagated to every owned pipeline at generate() time; last set wins
        self._configs = config

    def _require_configs(self) -> DataSourceConfig:
        if self._configs is None:
            raise MissingConfigError(f"{self.kind}: configs must be set before reset")
        return self._configs

    def _valid_dates(self, start: date, end: date) -> list[date]:
        config = self._require_configs()
        calendar = price_calendar(config, list(self.universe), start, end)
        return calendar[self.lookback_days:]

    def _generate(self, spec: DataPipelineSpec, start: date, end: date) -> TimeSeriesDataset:
        return generate(spec, self._configs, list(self.universe), start, end)

    def _pipeline_of_kind(self, kind: str) -> DataPipelineSpec:
        for spec in self._pipelines:
            if spec.pipeline_kind == kind:
                return spec
        raise UnknownKindError(f"{self.kind} owns no {kind!r} pipeline")

    def _scores_at(self, kind: str, as_of: date) -> dict[str, float]:
        """Last row of a pipeline generated over [reset.start, as_of] only."""
        spec = self._pipeline_of_kind(kind)
        ds = self._generate(spec, self._reset_state.start, as_of)
        return {a: ds.at(as_of, a) for a in self.universe}


class MLStrategy(DPStrategy):
    """Strategy owning ML algorithms in addition to data pipelines."""

    def __init__(self, meta: StrategyMeta, *, pipelines, algorithms: Sequence, **kwargs):
        super().__init__(meta, pipelines=pipelines, **kwargs)
        self._algorithms = list(algorithms or [])
        if not self._algorithms:
            raise MissingAlgorithmError(
                f"{self.kind}: an ML-level strategy needs at least one algorithm"
            )

    @property
    def algorithms(self) -> list:
        return list(self._algorithms)

    def fit(self, start: date, end: date) -> "MLStrategy":
        """Generate each pipeline over [start, end] and fit the algorithms."""
        self._require_configs()
        datasets = {
            spec.pipeline_kind: self._generate(spec, start, end)
            for spec in self._pipelines
        }
        self.fit_from_datasets(datasets)
        return self

    def fit_from_datasets(self, datasets: dict[str, TimeSeriesDataset]) -> None:
        raise NotImplementedError


def _ranked(scores: dict[str, float]) -> list[tuple[str, float]]:
    """Descending score; ties break by ascending asset id."""
    return sorted(scores.items(), key=lambda e: (-e[1], e[0]))


# --- reference strategies --------------------------------------------------------

@register_strategy
class EqualWeight(DPStrategy):
    """Allocation: 1/n weight on every universe asset."""

    kind = "equal_weight"

    def __init__(self, meta, *, pipelines=None, horizon_days=1, lookback_days=0, rng_seed=0):
        if pipelines is None:
            pipelines = [DataPipelineSpec("close_prices")]
        super().__init__(meta, pipelines=pipelines, horizon_days=horizon_days,
                         lookback_days=lookback_days, rng_seed=rng_seed)

    def _execute(self, as_of: date) -> Portfolio:
        w = 1.0 / len(self.universe)
        return Portfolio({a: w for a in self.universe})


@register_strategy
class MomentumTopK(DPStrategy):
    """Allocation: equal weight on the top-k assets by trailing return."""

    kind = "momentum_topk"

    def __init__(self, meta, *, pipelines=None, lookback_days=2, top_k=1,
                 horizon_days=1, rng_seed=0):
        if pipelines is None:
            pipelines = [DataPipelineSpec("trailing_return", {"lookback_days": lookback_days})]
        super().__init__(meta, pipelines=pipelines, horizon_days=horizon_days,
                         lookback_days=lookback_days, rng_seed=rng_seed)
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        self.top_k = int(top_k)

    def params(self) -> dict:
        return {"top_k": self.top_k}

    def _execute(self, as_of: date) -> Portfolio:
        scores = self._scores_at("trailing_return", as_of)
        k = min(self.top_k, len(self.universe))
        held = [a for a, _ in _ranked(scores)[:k]]
        return Portfolio({a: 1.0 / k for a in held})


@register_strategy
class RankByMomentum(DPStrategy):
    """Selection: rank the whole universe by trailing return."""

    kind = "rank_by_momentum"

    def __init__(self, meta, *, pipelines=None, lookback_days=2, horizon_days=1, rng_seed=0):
        if pipelines is None:
            pipelines = [DataPipelineSpec("trailing_return", {"lookback_days": lookback_days})]
        super().__init__(meta, pipelines=pipelines, horizon_days=horizon_days,
                         lookback_days=lookback_days, rng_seed=rng_seed)

    def _execute(self, as_of: date) -> Rank:
        scores = self._scores_at("trailing_return", as_of)
        return Rank(tuple(_ranked(scores)))


@register_strategy
class MomentumHedge(DPStrategy):
    """Hedge: per-asset signal = clamp(gain * trailing return) to [-1, 1]."""

    kind = "momentum_hedge"

    def __init__(self, meta, *, pipelines=None, lookback_days=2, gain=1.0,
                 horizon_days=1, rng_seed=0):
        if pipelines is None:
            pipelines = [DataPipelineSpec("trailing_return", {"lookback_days": lookback_days})]
        super().__init__(meta, pipelines=pipelines, horizon_days=horizon_days,
                         lookback_days=lookback_days, rng_seed=rng_seed)
        self.gain = float(gain)

    def params(self) -> dict:
        return {"gain": self.gain}

    def _execute(self, as_of: date) -> Signal:
        scores = self._scores_at("trailing_return", as_of)
        return Signal(
            {a: max(-1.0, min(1.0, self.gain * s)) for a, s in scores.items()}
        )


@register_strategy
class MLTopK(MLStrategy):
    """Allocation: equal weight on the top-k assets by predicted next return.

    One OLS model per universe asset, trained on (trailing return at t,
    realized next-day return) pairs assembled from the owned pipelines.
    """

    kind = "ml_topk"

    FEATURE = "trailing_return"
    TARGET = "next_return"

    def __init__(self, meta, *, pipelines=None, algorithms=None, lookback_days=2,
                 top_k=1, horizon_days=1, rng_seed=0):
        if pipelines is None:
            pipelines = [
                DataPipelineSpec("trailing_return", {"lookback_days": lookback_days}),
                DataPipelineSpec("simple_returns"),
            ]
        if algorithms is None:
            algorithms = [OLSRegressor() for _ in meta.universe]
        super().__init__(meta, pipelines=pipelines, algorithms=algorithms,
                         horizon_days=horizon_days, lookback_days=lookback_days,
                         rng_seed=rng_seed)
        if len(self._algorithms) != len(self.universe):
            raise MissingAlgorithmError(
                f"{self.kind} needs one algorithm per universe asset "
                f"({len(self.universe)}), got {len(self._algorithms)}"
            )
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        self.top_k = int(top_k)

    def params(self) -> dict:
        return {"top_k": self.top_k}

    def fit_from_datasets(self, datasets: dict[str, TimeSeriesDataset]) -> None:
        trailing = datasets["trailing_return"]
        simple = datasets["simple_returns"]
        for model, asset in zip(self._algorithms, self.universe):
            frame = self._training_frame(trailing, simple, asset)
            model.fit(frame, y=self.TARGET)

    def _training_frame(self, trailing, simple, asset) -> TimeSeriesDataset:
        """Pairs (feature at t, simple return at the next trading day)."""
        feats = trailing.column(asset)
        targets = simple.column(asset)
        rows, dates = [], []
        for i, d in enumerate(trailing.index):
            j = bisect.bisect_right(simple.index, d)
            if j >= len(simple.index):
                continue
            rows.append([feats[i], targets[j]])
            dates.append(d)
        return TimeSeriesDataset(dates, (self.FEATURE, self.TARGET), rows)

    def _execute(self, as_of: date) -> Portfolio:
        scores = self._scores_at("trailing_return", as_of)
        predicted = {}
        for model, asset in zip(self._algorithms, self.universe):
            frame = TimeSeriesDataset([as_of], (self.FEATURE,), [[scores[asset]]])
            predicted[asset] = float(model.predict(frame).values[0, 0])
        k = min(self.top_k, len(self.universe))
        held = [a for a, _ in _ranked(predicted)[:k]]
        return Portfolio({a: 1.0 / k for a in held})


# --- outcome serialization ---------------------------------------------------------

def format_weight(w: float) -> str:
    """Decimal string with at most 12 fractional digits."""
    s = f"{w:.{WEIGHT_DECIMALS}f}".rstrip("0").rstrip(".")
    return s if s else "0"


def outcome_to_json_dict(o: Outcome) -> dict:
    _, content_type = CONTENT_TYPES[_content_strategy_type(o.content)]
    if isinstance(o.content, Portfolio):
        content = {a: format_weight(w) for a, w in o.content.weights.items()}
    elif isinstance(o.content, Rank):
        content = [[a, s] for a, s in o.content.entries]
    else:
        content = {a: float(v) for a, v in o.content.values.items()}
    return {
        "schema_version": OUTCOME_SCHEMA_VERSION,
        "strategy_id": o.strategy_id,
        "as_of": o.as_of.isoformat(),
        "horizon_days": o.horizon_days,
        "content_type": content_type,
        "content": content,
    }


def outcome_from_json_dict(obj: dict) -> Outcome:
    kind = obj["content_type"]
    raw = obj["content"]
    if kind == "portfolio":
        content = Portfolio({a: float(w) for a, w in raw.items()})
    elif kind == "rank":
        content = Rank(tuple((a, float(s)) for a, s in raw))
    elif kind == "signal":
        content = Signal({a: float(v) for a, v in raw.items()})
    else:
        raise ValueError(f"unknown content_type {kind!r}")
    return Outcome(
        strategy_id=obj["strategy_id"],
        as_of=date.fromisoformat(obj["as_of"]),
        horizon_days=int(obj["horizon_days"]),
        content=content,
    )


def _content_strategy_type(content) -> StrategyType:
    for st, (cls, _) in CONTENT_TYPES.items():
        if isinstance(content, cls):
            return st
    raise TypeError(f"unknown outcome content {type(content).__name__}")
