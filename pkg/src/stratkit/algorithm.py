"""Algorithm-layer contracts and reference implementations.

Three families share one persistence contract (``save_algorithm`` /
``load_algorithm`` through a registered kind name):

* estimators with sklearn-style ``fit`` plus capability mix-ins
  (``Predictor.predict``, ``Transformer.transform``),
* gym-style environments (``reset`` / ``step``),
* reinforcement-learning agents (``act`` / ``update`` plus ``rl_train``).

Reference implementations: ordinary least squares, a standard scaler, and
an epsilon-greedy bandit agent with a deterministic bandit environment.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import (
    CorruptBlobError,
    EmptyDataError,
    InvalidActionError,
    MissingTargetError,
    NotFittedError,
    NotResetError,
    SchemaVersionError,
    SerializationError,
    ShapeError,
    UnknownKindError,
)
from .timeseries import TimeSeriesDataset

SCHEMA_VERSION = 1

_ALGORITHMS: dict[str, type] = {}


def register_algorithm(cls):
    """Class decorator: make ``cls`` loadable by its ``kind`` name."""
    _ALGORITHMS[cls.kind] = cls
    return cls


def algorithm_kinds() -> list[str]:
    return sorted(_ALGORITHMS)


@dataclass(frozen=True)
class AlgorithmManifest:
    """Self-contained serialized algorithm: kind, params, and fitted state."""

    schema_version: int
    algo_kind: str
    params: dict
    state_blob: bytes

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "algo_kind": self.algo_kind,
            "params": dict(self.params),
            "state_blob_b64": base64.b64encode(self.state_blob).decode("ascii"),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "AlgorithmManifest":
        try:
            blob = base64.b64decode(obj["state_blob_b64"], validate=True)
        except Exception as e:
            raise CorruptBlobError(f"invalid state blob encoding: {e}") from e
        return cls(
            schema_version=int(obj["schema_version"]),
            algo_kind=obj["algo_kind"],
            params=dict(obj["params"]),
            state_blob=blob,
        )


def save_algorithm(algo) -> AlgorithmManifest:
    """Serialize any registered algorithm; unfitted state yields an empty blob."""
    state = algo.to_state()
    if state is None:
        blob = b""
    else:
        try:
            blob = json.dumps(state, separators=(",", ":")).encode("utf-8")
        except (TypeError, ValueError) as e:
            raise SerializationError(f"cannot serialize {algo.kind} state: {e}") from e
    return AlgorithmManifest(
        schema_version=SCHEMA_VERSION,
        algo_kind=algo.kind,
        params=algo.params(),
        state_blob=blob,
    )


def load_algorithm(manifest: AlgorithmManifest):
    """Reconstruct an algorithm that behaves identically to the saved one."""
    if manifest.schema_version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unsupported algorithm schema_version {manifest.schema_version}"
        )
    cls = _ALGORITHMS.get(manifest.algo_kind)
    if cls is None:
        raise UnknownKindError(f"unregistered algorithm kind {manifest.algo_kind!r}")
    if manifest.state_blob == b"":
        state = None
    else:
        try:
            state = json.loads(manifest.state_blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptBlobError(f"undecodable state blob: {e}") from e
    try:
        return cls.from_state(manifest.params, state)
    except (KeyError, TypeError, IndexError) as e:
        raise CorruptBlobError(f"malformed {manifest.algo_kind} state: {e}") from e


# --- estimators ----------------------------------------------------------------

class Estimator:
    """Base for fit-then-apply algorithms.

    Subclasses set ``kind`` and ``supervised``, implement ``_fit`` and the
    state hooks.  ``fit`` never mutates its input dataset.
    """

    kind: ClassVar[str]
    supervised: ClassVar[bool] = False

    def __init__(self):
        self.fitted = False

    def fit(self, X: TimeSeriesDataset, y: str | None = None) -> "Estimator":
        if len(X) == 0:
            raise EmptyDataError(f"cannot fit {self.kind} on a zero-row dataset")
        if self.supervised:
            if y is None:
                raise MissingTargetError(f"{self.kind} requires a target column")
            if y not in X.columns:
                raise MissingTargetError(f"target column {y!r} not in dataset")
        self._fit(X, y)
        self.fitted = True
        return self

    def _fit(self, X: TimeSeriesDataset, y: str | None):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_state(self) -> dict | None:
        raise NotImplementedError

    @classmethod
    def from_state(cls, params: dict, state: dict | None):
        raise NotImplementedError


class Predictor:
    """Capability mix-in: fitted estimators that emit a prediction column."""

    def predict(self, X: TimeSeriesDataset) -> TimeSeriesDataset:
        if not self.fitted:
            raise NotFittedError(f"{self.kind} is not fitted")
        return self._predict(X)


class Transformer:
    """Capability mix-in: fitted estimators that rewrite feature columns."""

    def transform(self, X: TimeSeriesDataset) -> TimeSeriesDataset:
        if not self.fitted:
            raise NotFittedError(f"{self.kind} is not fitted")
        return self._transform(X)


@register_algorithm
class OLSRegressor(Estimator, Predictor):
    """Ordinary least squares with intercept.

    Fits on every non-target column of the dataset; ``predict`` emits a
    single "prediction" column aligned with the input index.
    """

    kind = "ols"
    supervised = True

    def __init__(self):
        super().__init__()
        self.feature_columns: tuple[str, ...] = ()
        self.target_column: str | None = None
        self.coef: np.ndarray | None = None
        self.intercept: float | None = None

    def _fit(self, X: TimeSeriesDataset, y: str | None):
        features = tuple(c for c in X.columns if c != y)
        if not features:
            raise MissingTargetError("dataset has no feature columns besides the target")
        mat = np.column_stack([X.column(c) for c in features])
        design = np.column_stack([mat, np.ones(len(X))])
        target = X.column(y)
        solution, *_ = np.linalg.lstsq(design, target, rcond=None)
        self.feature_columns = features
        self.target_column = y
        self.coef = solution[:-1]
        self.intercept = float(solution[-1])

    def _predict(self, X: TimeSeriesDataset) -> TimeSeriesDataset:
        missing = [c for c in self.feature_columns if c not in X.columns]
        if missing:
            raise ShapeError(f"prediction input lacks fitted feature columns {missing}")
        if len(X) == 0:
            return TimeSeriesDataset((), ("prediction",), np.empty((0, 1)))
        mat = np.column_stack([X.column(c) for c in self.feature_columns])
        yhat = mat @ self.coef + self.intercept
        return TimeSeriesDataset(X.index, ("prediction",), yhat.reshape(-1, 1))

    def to_state(self) -> dict | None:
        if not self.fitted:
            return None
        return {
            "feature_columns": list(self.feature_columns),
            "target_column": self.target_column,
            "coef": [float(c) for c in self.coef],
            "intercept": self.intercept,
        }

    @classmethod
    def from_state(cls, params: dict, state: dict | None) -> "OLSRegressor":
        e = cls()
        if state is not None:
            e.feature_columns = tuple(state["feature_columns"])
            e.target_column = state["target_column"]
            e.coef = np.array(state["coef"], dtype=np.float64)
            e.intercept = float(state["intercept"])
            e.fitted = True
        return e


@register_algorithm
class StandardScaler(Estimator, Transformer):
    """Column-wise standardization with sample standard deviation (ddof=1).

    Columns with zero (or undefined, n=1) spread are centered only.
    """

    kind = "standard_scaler"
    supervised = False

    def __init__(self):
        super().__init__()
        self.columns: tuple[str, ...] = ()
        self.means: np.ndarray | None = None
        self.scales: np.ndarray | None = None

    def _fit(self, X: TimeSeriesDataset, y: str | None):
        self.columns = X.columns
        self.means = X.values.mean(axis=0)
        if len(X) < 2:
            stds = np.zeros(X.n_cols)
        else:
            stds = X.values.std(axis=0, ddof=1)
        self.scales = np.where(stds == 0.0, 1.0, stds)

    def _transform(self, X: TimeSeriesDataset) -> TimeSeriesDataset:
        if X.columns != self.columns:
            raise ShapeError(
                f"transform input columns {list(X.columns)} differ from "
                f"fitted columns {list(self.columns)}"
            )
        out = (X.values - self.means) / self.scales
        return TimeSeriesDataset(X.index, X.columns, out)

    def to_state(self) -> dict | None:
        if not self.fitted:
            return None
        return {
            "columns": list(self.columns),
            "means": [float(m) for m in self.means],
            "scales": [float(s) for s in self.scales],
        }

    @classmethod
    def from_state(cls, params: dict, state: dict | None) -> "StandardScaler":
        e = cls()
        if state is not None:
            e.columns = tuple(state["columns"])
            e.means = np.array(state["means"], dtype=np.float64)
            e.scales = np.array(state["scales"], dtype=np.float64)
            e.fitted = True
        return e


# --- environments ----------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteSpace:
    """Action/observation space of integers 0 .. n-1."""

    n: int

    def contains(self, value) -> bool:
        return isinstance(value, (int, np.integer)) and 0 <= int(value) < self.n


class Environment:
    """Gym-style episodic environment.

    ``step`` is callable only between a ``reset`` and the terminal step of
    an episode; outside that window it raises ``NotResetError``.
    """

    action_space: DiscreteSpace
    observation_space: DiscreteSpace

    def __init__(self):
        self._ready = False

    def reset(self, seed: int | None = None):
        self._ready = True
        return self._reset(seed)

    def step(self, action):
        if not self._ready:
            raise NotResetError("step called before reset (or after a terminal step)")
        if not self.action_space.contains(action):
            raise InvalidActionError(
                f"action {action!r} outside Discrete({self.action_space.n})"
            )
        obs, reward, terminated, info = self._step(int(action))
        if terminated:
            self._ready = False
        return obs, reward, terminated, info

    def _reset(self, seed):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError


class BanditEnv(Environment):
    """Deterministic multi-armed bandit: each episode is one pull."""

    def __init__(self, arm_rewards: list[float]):
        super().__init__()
        self.arm_rewards = [float(r) for r in arm_rewards]
        self.action_space = DiscreteSpace(len(self.arm_rewards))
        self.observation_space = DiscreteSpace(1)

    def _reset(self, seed):
        return 0

    def _step(self, action):
        return 0, self.arm_rewards[action], True, {}


def two_arm_bandit() -> BanditEnv:
    """Reference fixture environment: arm rewards fixed at 0.0 and 1.0."""
    return BanditEnv([0.0, 1.0])


# --- reinforcement-learning agents ---------------------------------------------

@register_algorithm
class EpsilonGreedyBandit:
    """Epsilon-greedy bandit agent with incremental-mean value estimates.

    Behavior is fully determined by ``rng_seed``; the RNG state travels in
    the saved manifest so a reloaded agent continues the same action
    sequence.
    """

    kind = "epsilon_greedy_bandit"

    def __init__(
        self,
        n_arms: int = 2,
        epsilon: float = 1.0,
        epsilon_decay: float = 0.95,
        rng_seed: int = 0,
    ):
        if n_arms < 1:
            raise ValueError("n_arms must be >= 1")
        self.n_arms = n_arms
        self.epsilon = float(epsilon)
        self.epsilon_decay = float(epsilon_decay)
        self.rng_seed = int(rng_seed)
        self.values = np.zeros(n_arms)
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self._rng = np.random.Generator(np.random.PCG64(self.rng_seed))

    def act(self) -> int:
        """Explore uniformly with probability epsilon, else exploit."""
        if self._rng.random() < self.epsilon:
            return int(self._rng.integers(self.n_arms))
        return self.greedy_action()

    def greedy_action(self) -> int:
        return int(np.argmax(self.values))  # ties resolve to the lowest arm

    def update(self, action: int, reward: float) -> None:
        if not (0 <= action < self.n_arms):
            raise InvalidActionError(f"arm {action} outside 0..{self.n_arms - 1}")
        self.counts[action] += 1
        self.values[action] += (reward - self.values[action]) / self.counts[action]

    def decay(self) -> None:
        self.epsilon *= self.epsilon_decay

    def params(self) -> dict:
        return {
            "n_arms": self.n_arms,
            "epsilon_decay": self.epsilon_decay,
            "rng_seed": self.rng_seed,
        }

    def to_state(self) -> dict:
        return {
            "values": [float(v) for v in self.values],
            "counts": [int(c) for c in self.counts],
            "epsilon": self.epsilon,
            "rng_state": self._rng.bit_generator.state,
        }

    @classmethod
    def from_state(cls, params: dict, state: dict | None) -> "EpsilonGreedyBandit":
        agent = cls(
            n_arms=int(params["n_arms"]),
            epsilon_decay=float(params["epsilon_decay"]),
            rng_seed=int(params["rng_seed"]),
        )
        if state is not None:
            agent.values = np.array(state["values"], dtype=np.float64)
            agent.counts = np.array(state["counts"], dtype=np.int64)
            agent.epsilon = float(state["epsilon"])
            agent._rng.bit_generator.state = state["rng_state"]
        return agent


def rl_train(agent: EpsilonGreedyBandit, env: Environment, episodes: int) -> EpsilonGreedyBandit:
    """Run ``episodes`` one-step episodes of epsilon-greedy learning.

    After training, the greedy action is the argmax of the learned value
    estimates.  Deterministic given the agent seed and a deterministic env.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    for _ in range(episodes):
        env.reset()
        terminated = False
        while not terminated:  # bandit episodes are one step; generic envs may loop
            action = agent.act()
            _, reward, terminated, _ = env.step(action)
            agent.update(action, reward)
        agent.decay()
    return agent
