"""DAG pipeline definition and the in-process runner.

A pipeline is a set of tasks with explicit dependencies.  Tasks share
nothing but the object store and their (scalar) params: every inter-task
handoff happens through store keys, mirroring execution in disposable
containers.  Independent tasks may run concurrently up to a
``max_parallel`` bound; a failed task marks exactly its transitive
dependents as skipped while the rest of the graph still runs.

Two DAG templates reproduce the product lifecycle: a train pipeline
(generate data, fit algorithms, assemble and save the strategy) and an
inference pipeline (load, execute, archive the outcome).
"""

from __future__ import annotations

import graphlib
import json
import re
import threading
import traceback
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Callable

from . import registry as reg
from .backtest import build_report, default_periods_per_year
from .data import DataSourceConfig, dataset_from_json_dict, dataset_to_json_dict, generate
from .errors import (
    CycleError,
    DuplicateTaskError,
    UnknownDependencyError,
    UnknownKindError,
)
from .strategy import (
    MLStrategy,
    StrategyMeta,
    new_strategy,
    outcome_from_json_dict,
)

_TASK_ID_RE = re.compile(r"^[a-z0-9_-]+$")

_SCALAR_TYPES = (str, int, float, bool)


@dataclass(frozen=True)
class Resources:
    """Requested task resources; recorded metadata, never enforced locally."""

    cpu: float = 1.0
    memory_mb: int = 256
    gpu: int = 0

    def __post_init__(self):
        if self.cpu < 0 or self.memory_mb < 0 or self.gpu < 0:
            raise ValueError("resources must be non-negative")

    def to_json_dict(self) -> dict:
        return {"cpu": self.cpu, "memory_mb": self.memory_mb, "gpu": self.gpu}


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    op: str
    params: dict = field(default_factory=dict)
    depends_on: tuple[str, ...] = ()
    resources: Resources = Resources()

    def __post_init__(self):
        if not _TASK_ID_RE.match(self.task_id):
            raise ValueError(f"malformed task_id {self.task_id!r}")
        object.__setattr__(self, "depends_on", tuple(self.depends_on))
        for key, value in self.params.items():
            if not isinstance(value, _SCALAR_TYPES):
                raise ValueError(f"task param {key!r} must be a scalar, got {type(value).__name__}")

    def to_json_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "op": self.op,
            "params": dict(self.params),
            "depends_on": list(self.depends_on),
            "resources": self.resources.to_json_dict(),
        }


@dataclass(frozen=True)
class PipelineDag:
    dag_id: str
    tasks: tuple[TaskSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))


def dag_to_json_dict(dag: PipelineDag) -> dict:
    return {"dag_id": dag.dag_id, "tasks": [t.to_json_dict() for t in dag.tasks]}


def dag_from_json_dict(obj: dict) -> PipelineDag:
    tasks = []
    for t in obj["tasks"]:
        res = t.get("resources", {})
        tasks.append(
            TaskSpec(
                task_id=t["task_id"],
                op=t["op"],
                params=dict(t.get("params", {})),
                depends_on=tuple(t.get("depends_on", ())),
                resources=Resources(**res) if res else Resources(),
            )
        )
    return PipelineDag(dag_id=obj["dag_id"], tasks=tuple(tasks))


def validate_dag(dag: PipelineDag) -> None:
    """Check id uniqueness, dependency closure, and acyclicity.

    Raises:
        DuplicateTaskError, UnknownDependencyError, or CycleError (with the
        task ids of one offending cycle).
    """
    ids = [t.task_id for t in dag.tasks]
    seen: set[str] = set()
    for tid in ids:
        if tid in seen:
            raise DuplicateTaskError(f"duplicate task id {tid!r} in dag {dag.dag_id!r}")
        seen.add(tid)
    for t in dag.tasks:
        for dep in t.depends_on:
            if dep == t.task_id:
                raise CycleError(f"task {t.task_id!r} depends on itself", [t.task_id])
            if dep not in seen:
                raise UnknownDependencyError(
                    f"task {t.task_id!r} depends on unknown task {dep!r}"
                )
    sorter = graphlib.TopologicalSorter({t.task_id: set(t.depends_on) for t in dag.tasks})
    try:
        sorter.prepare()
    except graphlib.CycleError as e:
        cycle = list(dict.fromkeys(e.args[1]))
        raise CycleError(f"dependency cycle through tasks {cycle}", cycle) from None


# --- run reports -----------------------------------------------------------------

class TaskStatus(str, Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class TaskResult:
    status: TaskStatus
    started_at: datetime
    finished_at: datetime
    log_key: str


@dataclass(frozen=True)
class RunReport:
    run_id: str
    dag_id: str
    started_at: datetime
    finished_at: datetime
    tasks: dict  # task_id -> TaskResult, in DAG order

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "dag_id": self.dag_id,
            "started_at": self.started_at.isoformat(),
            "finished_at": self.finished_at.isoformat(),
            "tasks": {
                tid: {
                    "status": r.status.value,
                    "started_at": r.started_at.isoformat(),
                    "finished_at": r.finished_at.isoformat(),
                    "log_key": r.log_key,
                }
                for tid, r in self.tasks.items()
            },
        }

    def failed_tasks(self) -> list[str]:
        return [tid for tid, r in self.tasks.items() if r.status is TaskStatus.FAILED]


class _UtcClock:
    """UTC timestamps that strictly increase across causally ordered calls.

    Report consumers rely on finish(dependency) < start(dependent) holding
    strictly, which wall-clock microsecond resolution alone cannot promise.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._last = datetime.min.replace(tzinfo=timezone.utc)

    def now(self) -> datetime:
        with self._lock:
            t = datetime.now(timezone.utc)
            if t <= self._last:
                t = self._last + timedelta(microseconds=1)
            self._last = t
            return t


# --- task execution ------------------------------------------------------------------

@dataclass
class TaskContext:
    """Everything a task op may touch: the store, its params, and a logger."""

    store: object
    data_config: DataSourceConfig | None
    run_id: str
    task_id: str
    params: dict
    log: Callable[[str], None]


TaskOp = Callable[[TaskContext], None]

_TASK_OPS: dict[str, TaskOp] = {}


def register_task_op(name: str, fn: TaskOp) -> None:
    _TASK_OPS[name] = fn


def task_op_names() -> list[str]:
    return sorted(_TASK_OPS)


def _run_task(spec: TaskSpec, store, data_config, run_id: str, clock: _UtcClock):
    lines: list[str] = []

    def log(msg: str) -> None:
        lines.append(f"{clock.now().isoformat()} {msg}")

    started = clock.now()
    ctx = TaskContext(
        store=store,
        data_config=data_config,
        run_id=run_id,
        task_id=spec.task_id,
        params=dict(spec.params),
        log=log,
    )
    try:
        op = _TASK_OPS.get(spec.op)
        if op is None:
            raise UnknownKindError(f"unregistered task op {spec.op!r}")
        op(ctx)
        status = TaskStatus.SUCCEEDED
        lines.append("status: succeeded")
    except Exception:
        status = TaskStatus.FAILED
        lines.append("status: failed")
        lines.append(traceback.format_exc())
    finished = clock.now()
    result = TaskResult(status, started, finished, reg.task_log_key(run_id, spec.task_id))
    return result, "\n".join(lines) + "\n"


def run_dag(
    dag: PipelineDag,
    store,
    data_config: DataSourceConfig | None = None,
    *,
    run_id: str | None = None,
    max_parallel: int = 4,
) -> RunReport:
    """Execute a validated DAG; archive per-task logs and the run report.

    Tasks with no path between them may run concurrently (bounded by
    ``max_parallel``).  A failing task fails alone: its transitive
    dependents are marked skipped, everything else still runs.
    """
    validate_dag(dag)
    if run_id is None:
        run_id = reg.new_id()
    elif not reg.is_valid_id(run_id):
        raise ValueError(f"run_id must be 32 lowercase hex chars, got {run_id!r}")
    if max_parallel < 1:
        raise ValueError("max_parallel must be >= 1")

    clock = _UtcClock()
    run_started = clock.now()
    tasks = {t.task_id: t for t in dag.tasks}
    pending = {t.task_id: len(t.depends_on) for t in dag.tasks}
    dependents: dict[str, list[str]] = {t.task_id: [] for t in dag.tasks}
    for t in dag.tasks:
        for dep in t.depends_on:
            dependents[dep].append(t.task_id)

    results: dict[str, TaskResult] = {}

    def resolve(task_id: str, result: TaskResult, log_text: str) -> list[str]:
        store.put(reg.task_log_key(run_id, task_id), log_text.encode("utf-8"))
        results[task_id] = result
        released = []
        for child in dependents[task_id]:
            pending[child] -= 1
            if pending[child] == 0:
                released.append(child)
        return released

    queue = [t.task_id for t in dag.tasks if pending[t.task_id] == 0]
    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        futures: dict = {}
        while queue or futures:
            while queue:
                tid = queue.pop(0)
                spec = tasks[tid]
                blocker = next(
                    (d for d in spec.depends_on
                     if results[d].status is not TaskStatus.SUCCEEDED),
                    None,
                )
                if blocker is None:
                    fut = pool.submit(_run_task, spec, store, data_config, run_id, clock)
                    futures[fut] = tid
                else:
                    ts = clock.now()
                    skipped = TaskResult(
                        TaskStatus.SKIPPED, ts, ts, reg.task_log_key(run_id, tid)
                    )
                    queue.extend(
                        resolve(tid, skipped, f"skipped: dependency {blocker!r} did not succeed\n")
                    )
            if not futures:
                break
            done, _ = wait(list(futures), return_when=FIRST_COMPLETED)
            for fut in done:
                tid = futures.pop(fut)
                result, log_text = fut.result()
                queue.extend(resolve(tid, result, log_text))

    run_finished = clock.now()
    report = RunReport(
        run_id=run_id,
        dag_id=dag.dag_id,
        started_at=run_started,
        finished_at=run_finished,
        tasks={t.task_id: results[t.task_id] for t in dag.tasks},
    )
    store.put(reg.run_status_key(run_id), reg.canonical_json_bytes(report.to_json_dict()))
    return report


# --- product DAG templates --------------------------------------------------------------

_PRODUCT_KEYS = ("strategy_kind", "universe", "benchmark", "strategy_type", "start", "end")


def _product_params(strategy_kind: str, meta: StrategyMeta, params: dict | None,
                    start: date, end: date) -> dict:
    flat = {
        "strategy_kind": strategy_kind,
        "universe": ",".join(meta.universe),
        "benchmark": meta.benchmark,
        "strategy_type": meta.strategy_type.value,
        "start": start.isoformat(),
        "end": end.isoformat(),
    }
    for key, value in (params or {}).items():
        if key in flat:
            raise ValueError(f"strategy param {key!r} collides with a product field")
        flat[key] = value
    return flat


def _product_strategy(task_params: dict):
    """Reconstruct the (unfitted) product strategy from flattened task params."""
    meta = StrategyMeta(
        universe=tuple(task_params["universe"].split(",")),
        benchmark=task_params["benchmark"],
        strategy_type=task_params["strategy_type"],
    )
    params = {k: v for k, v in task_params.items() if k not in _PRODUCT_KEYS}
    return new_strategy(task_params["strategy_kind"], meta, params=params)


def _window(task_params: dict) -> tuple[date, date]:
    return date.fromisoformat(task_params["start"]), date.fromisoformat(task_params["end"])


def _artifact_key(run_id: str, *parts: str) -> str:
    return "/".join(["runs", run_id, "artifacts", *parts])


def inference_window_start(as_of: date, lookback_days: int) -> date:
    """Reset-window start guaranteeing warm-up data ahead of ``as_of``."""
    return as_of - timedelta(days=max(lookback_days * 3, 30))


def build_train_pipeline(
    strategy_kind: str,
    meta: StrategyMeta,
    *,
    params: dict | None = None,
    start: date,
    end: date,
    dag_id: str | None = None,
) -> PipelineDag:
    """Linear train chain: generate_data -> fit_algorithms -> assemble_strategy
    -> save_strategy.  The final task writes the new strategy id to
    ``runs/{run_id}/strategy_id.txt``.

    The product is validated (strategy constructed once) before the DAG is
    created, so constructor errors surface here, not at run time.
    """
    flat = _product_params(strategy_kind, meta, params, start, end)
    _product_strategy(flat)  # validate product before DAG creation
    chain = ["generate_data", "fit_algorithms", "assemble_strategy", "save_strategy"]
    tasks = []
    for i, op in enumerate(chain):
        tasks.append(
            TaskSpec(
                task_id=op,
                op=op,
                params=dict(flat),
                depends_on=(chain[i - 1],) if i else (),
            )
        )
    return PipelineDag(dag_id=dag_id or f"train-{strategy_kind}", tasks=tuple(tasks))


def build_inference_pipeline(
    strategy_id: str,
    as_of: date,
    *,
    dag_id: str | None = None,
) -> PipelineDag:
    """Inference chain: load_strategy -> execute_strategy -> save_outcome.

    A missing strategy id surfaces as a failed load task at run time.
    """
    common = {"strategy_id": strategy_id, "as_of": as_of.isoformat()}
    tasks = (
        TaskSpec(task_id="load_strategy", op="load_strategy", params=dict(common)),
        TaskSpec(
            task_id="execute_strategy",
            op="execute_strategy",
            params=dict(common),
            depends_on=("load_strategy",),
        ),
        TaskSpec(
            task_id="save_outcome",
            op="save_outcome",
            params=dict(common),
            depends_on=("execute_strategy",),
        ),
    )
    return PipelineDag(dag_id=dag_id or "inference", tasks=tasks)


# --- built-in task ops ------------------------------------------------------------------

def _op_generate_data(ctx: TaskContext) -> None:
    """Run every product pipeline over the window; archive one dataset each."""
    s = _product_strategy(ctx.params)
    start, end = _window(ctx.params)
    for i, spec in enumerate(s.pipelines):
        ds = generate(spec, ctx.data_config, list(s.universe), start, end)
        payload = {"pipeline_kind": spec.pipeline_kind, "dataset": dataset_to_json_dict(ds)}
        key = _artifact_key(ctx.run_id, "data", f"{i:02d}_{spec.pipeline_kind}.json")
        ctx.store.put(key, reg.canonical_json_bytes(payload))
        ctx.log(f"generated {spec.pipeline_kind}: {len(ds)} rows -> {key}")


def _op_fit_algorithms(ctx: TaskContext) -> None:
    """Fit owned algorithms on the archived datasets; archive their manifests."""
    s = _product_strategy(ctx.params)
    if isinstance(s, MLStrategy):
        datasets = {}
        for key in ctx.store.list_prefix(_artifact_key(ctx.run_id, "data")):
            payload = json.loads(ctx.store.get(key))
            datasets[payload["pipeline_kind"]] = dataset_from_json_dict(payload["dataset"])
        s.fit_from_datasets(datasets)
        from .algorithm import save_algorithm

        manifests = [save_algorithm(a).to_json_dict() for a in s.algorithms]
        ctx.log(f"fitted {len(manifests)} algorithm(s)")
    else:
        manifests = []
        ctx.log("strategy owns no algorithms; nothing to fit")
    ctx.store.put(
        _artifact_key(ctx.run_id, "algorithms.json"), reg.canonical_json_bytes(manifests)
    )


def _op_assemble_strategy(ctx: TaskContext) -> None:
    """Combine product params and fitted algorithms into a full manifest."""
    from .algorithm import AlgorithmManifest, load_algorithm

    raw = json.loads(ctx.store.get(_artifact_key(ctx.run_id, "algorithms.json")))
    algorithms = [load_algorithm(AlgorithmManifest.from_json_dict(a)) for a in raw]
    template = _product_strategy(ctx.params)
    s = new_strategy(
        template.kind,
        template.meta,
        pipelines=template.pipelines,
        algorithms=algorithms or None,
        params={
            **template.params(),
            "horizon_days": template.horizon_days,
            "lookback_days": template.lookback_days,
            "rng_seed": template.rng_seed,
        },
    )
    manifest = reg.build_manifest_dict(s, strategy_id="", created_at="")
    ctx.store.put(_artifact_key(ctx.run_id, "strategy.json"), reg.canonical_json_bytes(manifest))
    ctx.log(f"assembled {s.kind} strategy")


def _op_save_strategy(ctx: TaskContext) -> None:
    """Register the assembled strategy; record its id in the run artifacts."""
    manifest = json.loads(ctx.store.get(_artifact_key(ctx.run_id, "strategy.json")))
    s = reg.strategy_from_manifest_dict(manifest)
    strategy_id = reg.save_strategy(ctx.store, s)
    ctx.store.put(f"runs/{ctx.run_id}/strategy_id.txt", (strategy_id + "\n").encode("ascii"))
    ctx.log(f"saved strategy {strategy_id}")


def _op_load_strategy(ctx: TaskContext) -> None:
    """Existence and integrity check for the strategy to be executed."""
    s = reg.load_strategy(ctx.store, ctx.params["strategy_id"])
    ctx.log(f"loaded {s.kind} strategy {ctx.params['strategy_id']}")


def _op_execute_strategy(ctx: TaskContext) -> None:
    """load -> configs -> reset -> execute; archive the outcome artifact."""
    s = reg.load_strategy(ctx.store, ctx.params["strategy_id"])
    s.configs = ctx.data_config
    as_of = date.fromisoformat(ctx.params["as_of"])
    s.reset(inference_window_start(as_of, s.lookback_days), as_of)
    outcome = s.execute(as_of)
    from .strategy import outcome_to_json_dict

    ctx.store.put(
        _artifact_key(ctx.run_id, "outcome.json"),
        reg.canonical_json_bytes(outcome_to_json_dict(outcome)),
    )
    ctx.log(f"executed at {as_of.isoformat()}")


def _op_save_outcome(ctx: TaskContext) -> None:
    """Archive the executed outcome under its canonical key."""
    payload = json.loads(ctx.store.get(_artifact_key(ctx.run_id, "outcome.json")))
    outcome = outcome_from_json_dict(payload)
    key = reg.save_outcome(ctx.store, outcome.strategy_id, outcome)
    ctx.log(f"saved outcome -> {key}")


def _op_run_backtest(ctx: TaskContext) -> None:
    """Backtest a saved strategy; archive the report under this run's id."""
    strategy_id = ctx.params["strategy_id"]
    s = reg.load_strategy(ctx.store, strategy_id)
    start, end = _window(ctx.params)
    report = build_report(
        s,
        ctx.data_config,
        start,
        end,
        frequency=ctx.params.get("frequency", "monthly"),
        interval_days=ctx.params.get("interval_days"),
        group_by=ctx.params.get("group_by", "asset"),
        periods_per_year=default_periods_per_year(s.horizon_days),
    )
    key = reg.backtest_report_key(strategy_id, ctx.run_id)
    ctx.store.put(key, reg.canonical_json_bytes(report))
    ctx.log(f"backtest report -> {key}")


register_task_op("generate_data", _op_generate_data)
register_task_op("fit_algorithms", _op_fit_algorithms)
register_task_op("assemble_strategy", _op_assemble_strategy)
register_task_op("save_strategy", _op_save_strategy)
register_task_op("load_strategy", _op_load_strategy)
register_task_op("execute_strategy", _op_execute_strategy)
register_task_op("save_outcome", _op_save_outcome)
register_task_op("run_backtest", _op_run_backtest)
