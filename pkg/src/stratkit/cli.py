"""Command-line entry point for the product lifecycle.

Commands::

    stratkit pipeline validate --dag FILE
    stratkit pipeline run --dag FILE --store DIR --data DIR [--run-id HEX] [--max-parallel N]
    stratkit strategy list --store DIR
    stratkit strategy execute --id HEX --date YYYY-MM-DD --store DIR --data DIR
    stratkit backtest --id HEX --start D --end D [--frequency F | --interval-days N]
                      [--group-by G] [--format json|table] --store DIR --data DIR

Exit codes: 0 success, 1 domain error (one-line diagnostic on stderr),
2 usage error.  ``SHAI_STORE`` supplies ``--store`` when the flag is
absent.  stdout is the sole data channel; stderr the sole diagnostics
channel.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import date

from . import fixtures  # noqa: F401  — registers the in-memory F1 source
from .backtest import FREQUENCIES, GROUPINGS, build_report
from .data import DataSourceConfig
from .errors import StratkitError
from .pipeline import (
    dag_from_json_dict,
    inference_window_start,
    run_dag,
    validate_dag,
)
from .registry import (
    FilesystemStore,
    backtest_report_key,
    canonical_json_bytes,
    is_valid_id,
    list_strategies,
    load_strategy,
    new_id,
    save_outcome,
)

STORE_ENV_VAR = "SHAI_STORE"


def _iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date (yyyy-mm-dd): {text!r}")


def _hex_id(text: str) -> str:
    if not is_valid_id(text):
        raise argparse.ArgumentTypeError(f"not a 32-char lowercase hex id: {text!r}")
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stratkit",
        description="Strategy registry, pipeline runner, and backtester.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_store(p):
        p.add_argument("--store", help=f"object-store directory (default: ${STORE_ENV_VAR})")

    def add_data(p):
        p.add_argument("--data", required=True, help="data-source directory (csv_dir)")

    pipeline = sub.add_parser("pipeline", help="validate and run task DAGs")
    pipeline_sub = pipeline.add_subparsers(dest="subcommand", required=True)

    validate = pipeline_sub.add_parser("validate", help="check a DAG file")
    validate.add_argument("--dag", required=True, help="DAG JSON file")

    run = pipeline_sub.add_parser("run", help="execute a DAG file")
    run.add_argument("--dag", required=True, help="DAG JSON file")
    add_store(run)
    add_data(run)
    run.add_argument("--run-id", type=_hex_id, help="fixed run id (default: random)")
    run.add_argument("--max-parallel", type=int, default=4, help="task concurrency bound")

    strategy = sub.add_parser("strategy", help="inspect and execute saved strategies")
    strategy_sub = strategy.add_subparsers(dest="subcommand", required=True)

    slist = strategy_sub.add_parser("list", help="list saved strategy ids")
    add_store(slist)

    sexec = strategy_sub.add_parser("execute", help="execute a saved strategy for one date")
    sexec.add_argument("--id", required=True, type=_hex_id, help="strategy id")
    sexec.add_argument("--date", required=True, type=_iso_date, help="execution date")
    add_store(sexec)
    add_data(sexec)

    backtest = sub.add_parser("backtest", help="backtest a saved strategy")
    backtest.add_argument("--id", required=True, type=_hex_id, help="strategy id")
    backtest.add_argument("--start", required=True, type=_iso_date)
    backtest.add_argument("--end", required=True, type=_iso_date)
    bucket = backtest.add_mutually_exclusive_group()
    bucket.add_argument("--frequency", choices=FREQUENCIES, default=None)
    bucket.add_argument("--interval-days", type=int, default=None)
    backtest.add_argument("--group-by", choices=GROUPINGS, default="asset")
    backtest.add_argument("--format", choices=("json", "table"), default="table")
    add_store(backtest)
    add_data(backtest)

    return parser


def _resolve_store(parser: argparse.ArgumentParser, args) -> FilesystemStore:
    root = args.store or os.environ.get(STORE_ENV_VAR)
    if not root:
        parser.error(f"--store is required (or set ${STORE_ENV_VAR})")
    return FilesystemStore(root)


def _data_config(args) -> DataSourceConfig:
    return DataSourceConfig(source_kind="csv_dir", root=args.data)


def _load_dag(path: str):
    try:
        with open(path, encoding="utf-8") as f:
            obj = json.load(f)
    except OSError as e:
        raise StratkitError(f"cannot read DAG file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise StratkitError(f"DAG file {path} is not valid JSON: {e}") from e
    try:
        return dag_from_json_dict(obj)
    except (KeyError, TypeError, ValueError) as e:
        raise StratkitError(f"DAG file {path} is malformed: {e}") from e


# --- command handlers ------------------------------------------------------------

def _cmd_pipeline_validate(parser, args) -> int:
    dag = _load_dag(args.dag)
    validate_dag(dag)
    print(f"ok: {dag.dag_id} ({len(dag.tasks)} tasks)")
    return 0


def _cmd_pipeline_run(parser, args) -> int:
    store = _resolve_store(parser, args)
    dag = _load_dag(args.dag)
    report = run_dag(
        dag,
        store,
        _data_config(args),
        run_id=args.run_id,
        max_parallel=args.max_parallel,
    )
    print(f"run_id: {report.run_id}")
    width = max((len(t) for t in report.tasks), default=0)
    for task_id, result in report.tasks.items():
        print(f"{task_id:<{width}}  {result.status.value}")
    failed = report.failed_tasks()
    if failed:
        print(f"error: {len(failed)} task(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _cmd_strategy_list(parser, args) -> int:
    store = _resolve_store(parser, args)
    for strategy_id in list_strategies(store):
        print(strategy_id)
    return 0


def _cmd_strategy_execute(parser, args) -> int:
    store = _resolve_store(parser, args)
    s = load_strategy(store, args.id)
    s.configs = _data_config(args)
    s.reset(inference_window_start(args.date, s.lookback_days), args.date)
    outcome = s.execute(args.date)
    key = save_outcome(store, args.id, outcome)
    sys.stdout.buffer.write(store.get(key))
    return 0


def _cmd_backtest(parser, args) -> int:
    store = _resolve_store(parser, args)
    s = load_strategy(store, args.id)
    report = build_report(
        s,
        _data_config(args),
        args.start,
        args.end,
        frequency=args.frequency or "monthly",
        interval_days=args.interval_days,
        group_by=args.group_by,
    )
    payload = canonical_json_bytes(report)
    store.put(backtest_report_key(args.id, new_id()), payload)
    if args.format == "json":
        sys.stdout.buffer.write(payload)
    else:
        _print_report_table(report)
    return 0


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:.6f}"


def _print_report_table(report: dict) -> None:
    print(f"strategy: {report['strategy_id']}")
    print(f"range: {report['start']} .. {report['end']} ({len(report['period_returns'])} periods)")
    print()
    for name, value in report["metrics"].items():
        print(f"{name:<24} {_fmt(value):>12}")
    print()
    print(f"{'bucket':<12} {'return':>12} {'benchmark':>12} {'excess':>12}")
    for row in report["horizontal"]:
        print(
            f"{row['label']:<12} {_fmt(row['return']):>12} "
            f"{_fmt(row['benchmark_return']):>12} {_fmt(row['excess']):>12}"
        )
    print()
    print(f"{'group':<12} {'contribution':>14}")
    for row in report["vertical"]:
        print(f"{row['group']:<12} {_fmt(row['contribution']):>14}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        ("pipeline", "validate"): _cmd_pipeline_validate,
        ("pipeline", "run"): _cmd_pipeline_run,
        ("strategy", "list"): _cmd_strategy_list,
        ("strategy", "execute"): _cmd_strategy_execute,
        ("backtest", None): _cmd_backtest,
    }
    handler = handlers[(args.command, getattr(args, "subcommand", None))]
    try:
        return handler(parser, args)
    except StratkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
