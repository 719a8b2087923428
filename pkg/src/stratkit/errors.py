"""Exception hierarchy shared across the platform.

Every domain failure raised by this package derives from ``StratkitError``
so callers (most importantly the CLI) can map "domain error" to a single
exit-code class without enumerating subtypes.
"""


class StratkitError(Exception):
    """Base class for all domain errors raised by this package."""


# --- dataset construction and manipulation ---------------------------------

class ShapeError(StratkitError):
    """Row/column counts of a dataset are inconsistent."""


class OrderError(StratkitError):
    """Dataset index is not strictly increasing."""


class DuplicateColumnError(StratkitError):
    """Dataset column names are not unique."""


class RangeError(StratkitError):
    """A date range was given with start after end."""


# --- data loading -----------------------------------------------------------

class UnknownAssetError(StratkitError):
    """A requested asset is absent from the data source."""


class SourceError(StratkitError):
    """The data source is unreadable or malformed."""


class MissingConfigError(StratkitError):
    """A data-source config is required but has not been assigned."""


# --- algorithms -------------------------------------------------------------

class SerializationError(StratkitError):
    """An algorithm or strategy could not be serialized."""


class UnknownKindError(StratkitError):
    """A registered-name lookup (algorithm, strategy, pipeline) failed."""


class SchemaVersionError(StratkitError):
    """A persisted artifact uses an unsupported schema version."""


class CorruptBlobError(StratkitError):
    """A persisted state blob could not be decoded."""


class EmptyDataError(StratkitError):
    """An estimator was fitted on a dataset with no rows."""


class MissingTargetError(StratkitError):
    """A supervised fit was attempted without a target column."""


class NotFittedError(StratkitError):
    """predict/transform was called before fit."""


class NotResetError(StratkitError):
    """step/execute was called before reset."""


class InvalidActionError(StratkitError):
    """An environment action lies outside the action space."""


# --- strategies -------------------------------------------------------------

class EmptyUniverseError(StratkitError):
    """Strategy universe is empty or contains duplicates."""


class BenchmarkInUniverseError(StratkitError):
    """Strategy benchmark overlaps the investment universe."""


class MissingAlgorithmError(StratkitError):
    """An ML-level strategy was constructed without algorithms."""


class InvalidDateError(StratkitError):
    """execute was called on a date outside the valid-date list."""


# --- object store and registry ----------------------------------------------

class KeyFormatError(StratkitError):
    """An object key violates the key grammar."""


class StoreIoError(StratkitError):
    """The object store failed to read or write."""


class NotFoundError(StratkitError):
    """No object exists at the requested key or id."""


class DigestMismatchError(StratkitError):
    """A stored manifest failed its content-digest check."""


# --- pipelines ----------------------------------------------------------------

class CycleError(StratkitError):
    """The task graph contains a dependency cycle.

    ``cycle`` holds the task ids of one offending cycle.
    """

    def __init__(self, message: str, cycle: list[str] | None = None):
        super().__init__(message)
        self.cycle = list(cycle or [])


class UnknownDependencyError(StratkitError):
    """A task depends on a task id that is not in the DAG."""


class DuplicateTaskError(StratkitError):
    """Two tasks in one DAG share a task id."""


# --- backtesting --------------------------------------------------------------

class UnsupportedStrategyError(StratkitError):
    """The backtest engine only replays portfolio-producing strategies."""


class InsufficientDataError(StratkitError):
    """Fewer than two rebalance dates are available for a backtest."""


class InvalidIntervalError(StratkitError):
    """A custom aggregation interval is shorter than one day."""


class MissingMetadataError(StratkitError):
    """Attribution metadata does not cover every held asset."""


class EmptyResultError(StratkitError):
    """Metrics were requested for a backtest with zero periods."""
