"""Key-value object store and the strategy/outcome registry layered on it.

The store holds everything the platform archives: strategy manifests,
outcomes, pipeline run reports, task logs, and backtest reports.  Keys are
``/``-separated lowercase segments; the filesystem backend maps one key to
one file and writes atomically (temp file + rename).

Key layout:
    strategies/{id}/manifest.json
    outcomes/{id}/{yyyy-mm-dd}.json
    runs/{run_id}/status.json
    runs/{run_id}/logs/{task_id}.log
    backtests/{id}/{run_id}/report.json
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import secrets
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path

from .algorithm import AlgorithmManifest, load_algorithm, save_algorithm
from .data import DataPipelineSpec
from .errors import (
    DigestMismatchError,
    KeyFormatError,
    NotFoundError,
    SchemaVersionError,
    SerializationError,
    StoreIoError,
)
from .strategy import (
    BaseStrategy,
    Outcome,
    StrategyMeta,
    new_strategy,
    outcome_to_json_dict,
)

MANIFEST_SCHEMA_VERSION = 1

_SEGMENT_RE = re.compile(r"^[a-z0-9._-]+$")
_ID_RE = re.compile(r"^[0-9a-f]{32}$")


def canonical_json_bytes(obj) -> bytes:
    """Deterministic UTF-8 JSON: compact separators, insertion key order,
    trailing newline."""
    return (json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")


def validate_key(key: str) -> None:
    """Enforce the key grammar: non-empty `/`-separated [a-z0-9._-]+ segments."""
    if not key or key.startswith("/") or key.endswith("/"):
        raise KeyFormatError(f"malformed key {key!r}")
    for segment in key.split("/"):
        if not _SEGMENT_RE.match(segment):
            raise KeyFormatError(f"malformed key segment {segment!r} in {key!r}")
        if segment in (".", ".."):
            raise KeyFormatError(f"path-traversal segment {segment!r} in {key!r}")


def new_id() -> str:
    """Fresh 128-bit random identifier as 32 lowercase hex characters."""
    return secrets.token_hex(16)


def is_valid_id(value: str) -> bool:
    return bool(_ID_RE.match(value))


class FilesystemStore:
    """One file per object under a root directory; atomic, durable writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StoreIoError(f"cannot create store root {self.root}: {e}") from e

    def put(self, key: str, value: bytes) -> None:
        validate_key(key)
        path = self.root / key
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".put-")
            try:
                with os.fdopen(fd, "wb") as f:
                    f.write(value)
                os.replace(tmp, path)  # atomic: readers never see partial content
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        except OSError as e:
            raise StoreIoError(f"cannot write {key}: {e}") from e

    def get(self, key: str) -> bytes:
        validate_key(key)
        path = self.root / key
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFoundError(f"no object at {key!r}") from None
        except OSError as e:
            raise StoreIoError(f"cannot read {key}: {e}") from e

    def list_prefix(self, prefix: str) -> list[str]:
        """Keys equal to ``prefix`` or starting with ``prefix/``, sorted."""
        validate_key(prefix)
        keys = []
        base = self.root / prefix
        if base.is_file():
            keys.append(prefix)
        elif base.is_dir():
            try:
                for dirpath, _, filenames in os.walk(base):
                    rel = Path(dirpath).relative_to(self.root)
                    for name in filenames:
                        if name.startswith(".put-"):
                            continue  # in-flight temp file
                        keys.append(str(rel / name))
            except OSError as e:
                raise StoreIoError(f"cannot list {prefix!r}: {e}") from e
        return sorted(keys)


class InMemoryStore:
    """Dict-backed store with the same contract; test and scratch use."""

    def __init__(self):
        self._objects: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put(self, key: str, value: bytes) -> None:
        validate_key(key)
        with self._lock:
            self._objects[key] = bytes(value)

    def get(self, key: str) -> bytes:
        validate_key(key)
        with self._lock:
            try:
                return self._objects[key]
            except KeyError:
                raise NotFoundError(f"no object at {key!r}") from None

    def list_prefix(self, prefix: str) -> list[str]:
        validate_key(prefix)
        with self._lock:
            return sorted(
                k for k in self._objects if k == prefix or k.startswith(prefix + "/")
            )


# --- key schemas ----------------------------------------------------------------

def strategy_manifest_key(strategy_id: str) -> str:
    return f"strategies/{strategy_id}/manifest.json"


def outcome_key(strategy_id: str, as_of) -> str:
    return f"outcomes/{strategy_id}/{as_of.isoformat()}.json"


def run_status_key(run_id: str) -> str:
    return f"runs/{run_id}/status.json"


def task_log_key(run_id: str, task_id: str) -> str:
    return f"runs/{run_id}/logs/{task_id}.log"


def backtest_report_key(strategy_id: str, run_id: str) -> str:
    return f"backtests/{strategy_id}/{run_id}/report.json"


# --- strategy registry -------------------------------------------------------------

def build_manifest_dict(s: BaseStrategy, strategy_id: str, created_at: str) -> dict:
    """Manifest JSON object in schema key order, digest field blanked."""
    try:
        algorithms = [save_algorithm(a).to_json_dict() for a in getattr(s, "algorithms", [])]
    except SerializationError:
        raise
    except Exception as e:
        raise SerializationError(f"cannot serialize algorithms of {s.kind}: {e}") from e
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "strategy_id": strategy_id,
        "strategy_kind": s.kind,
        "meta": {
            "universe": list(s.universe),
            "benchmark": s.benchmark,
            "strategy_type": s.strategy_type.value,
        },
        "horizon_days": s.horizon_days,
        "lookback_days": s.lookback_days,
        "rng_seed": s.rng_seed,
        "pipelines": [p.to_json_dict() for p in getattr(s, "pipelines", [])],
        "algorithms": algorithms,
        "params": s.params(),
        "created_at": created_at,
        "content_digest": "",
    }


def _with_digest(manifest: dict) -> dict:
    blank = dict(manifest, content_digest="")
    digest = hashlib.sha256(canonical_json_bytes(blank)).hexdigest()
    return dict(manifest, content_digest=digest)


def save_strategy(store, s: BaseStrategy) -> str:
    """Persist a strategy manifest under a fresh random id; returns the id.

    The id is also assigned to ``s.strategy_id`` so subsequent outcomes
    carry it.  Data-source configs are deliberately not persisted; they
    are deployment-specific and must be re-set after load.
    """
    strategy_id = new_id()
    created_at = datetime.now(timezone.utc).isoformat()
    manifest = _with_digest(build_manifest_dict(s, strategy_id, created_at))
    store.put(strategy_manifest_key(strategy_id), canonical_json_bytes(manifest))
    s.strategy_id = strategy_id
    return strategy_id


def load_strategy(store, strategy_id: str) -> BaseStrategy:
    """Reconstruct a behaviorally identical strategy from its manifest.

    Raises:
        NotFoundError: unknown id.
        DigestMismatchError: any corruption of the stored manifest bytes.
        UnknownKindError: the strategy kind is not registered here.
    """
    raw = store.get(strategy_manifest_key(strategy_id))
    try:
        manifest = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DigestMismatchError(f"manifest for {strategy_id} is unreadable: {e}") from e
    # Any byte-level tamper either breaks the canonical form or the digest.
    if canonical_json_bytes(manifest) != raw:
        raise DigestMismatchError(f"manifest for {strategy_id} is not in canonical form")
    if not isinstance(manifest, dict) or "content_digest" not in manifest:
        raise DigestMismatchError(f"manifest for {strategy_id} lacks a content digest")
    stored = manifest["content_digest"]
    blank = dict(manifest, content_digest="")
    expected = hashlib.sha256(canonical_json_bytes(blank)).hexdigest()
    if stored != expected:
        raise DigestMismatchError(f"manifest digest mismatch for {strategy_id}")
    if manifest["schema_version"] != MANIFEST_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unsupported manifest schema_version {manifest['schema_version']}"
        )
    s = strategy_from_manifest_dict(manifest)
    s.strategy_id = strategy_id
    return s


def strategy_from_manifest_dict(manifest: dict) -> BaseStrategy:
    """Reconstruct a strategy from a manifest object (no integrity checks)."""
    meta = StrategyMeta(
        universe=tuple(manifest["meta"]["universe"]),
        benchmark=manifest["meta"]["benchmark"],
        strategy_type=manifest["meta"]["strategy_type"],
    )
    pipelines = [DataPipelineSpec.from_json_dict(p) for p in manifest["pipelines"]]
    algorithms = [
        load_algorithm(AlgorithmManifest.from_json_dict(a))
        for a in manifest["algorithms"]
    ]
    params = dict(manifest["params"])
    params["horizon_days"] = manifest["horizon_days"]
    params["lookback_days"] = manifest["lookback_days"]
    params["rng_seed"] = manifest["rng_seed"]
    s = new_strategy(
        manifest["strategy_kind"],
        meta,
        pipelines=pipelines,
        algorithms=algorithms or None,
        params=params,
    )
    s.strategy_id = manifest.get("strategy_id", "")
    return s


def list_strategies(store) -> list[str]:
    """Ids of all saved strategies, lexicographically sorted."""
    ids = []
    for key in store.list_prefix("strategies"):
        parts = key.split("/")
        if len(parts) == 3 and parts[2] == "manifest.json":
            ids.append(parts[1])
    return sorted(ids)


def save_outcome(store, strategy_id: str, outcome: Outcome) -> str:
    """Archive one outcome at ``outcomes/{id}/{as_of}.json``; returns the key.

    Re-saving the same date overwrites, keeping pipeline re-runs idempotent.
    """
    payload = dict(outcome_to_json_dict(outcome), strategy_id=strategy_id)
    key = outcome_key(strategy_id, outcome.as_of)
    store.put(key, canonical_json_bytes(payload))
    return key
