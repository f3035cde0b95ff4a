"""Command-line front end: ``semql run|explain|bench|ingest``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from semql.cascade.state import CascadeConfig
from semql.core.ingest import load_catalog, read_table, write_jsonl
from semql.core.values import FileRef, Table, render_value
from semql.errors import (
    ArityMismatch,
    LabelOverflow,
    PlanTypeError,
    ProviderError,
    QueryAborted,
    ScenarioParseError,
    SQLSyntaxError,
    UnknownNameError,
)
from semql.exec.engine import ExecOptions, execute
from semql.models.registry import ProviderRegistry, load_provider_config
from semql.planner.explain import explain_with_total
from semql.planner.optimizer import PlannerConfig, plan_query

EXIT_OK, EXIT_USAGE, EXIT_SQL, EXIT_PROVIDER = 0, 1, 2, 3
SQL_ERRORS = (SQLSyntaxError, UnknownNameError, PlanTypeError, ArityMismatch, LabelOverflow)


@dataclass
class RunConfig:
    tables_dir: Path | None = None
    provider_config: Path | None = None
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    cascade: CascadeConfig | None = None
    seed: int = 0
    output_format: str = "table"
    workers: int = 4
    batch_size: int = 64
    adaptive: bool = True


def _flag(value: str) -> bool:
    v = value.lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on or off, got {value!r}")


def parse_pairs(text: str | None) -> dict[str, str]:
    """``a=1,b=2`` to a dict."""
    out: dict[str, str] = {}
    for part in (text or "").split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip().lower()] = v.strip()
    return out


def planner_config(text: str | None, hints: dict | None = None) -> PlannerConfig:
    cfg = PlannerConfig(selectivity_hints=dict(hints or {}))
    for k, v in parse_pairs(text).items():
        if k == "reorder":
            cfg.reorder = _flag(v)
        elif k == "rewrite":
            cfg.rewrite = _flag(v)
        elif k == "placement":
            if v not in ("on", "auto", "pullup", "pushdown"):
                raise ValueError("placement must be on, auto, pullup or pushdown")
            cfg.placement = "auto" if v == "on" else v
        elif k in ("window", "context_window_tokens"):
            cfg.context_window_tokens = int(v)
        elif k == "agg_batch_tokens":
            cfg.agg_batch_tokens = int(v)
        else:
            raise ValueError(f"unknown optimizer option {k!r}")
    return cfg


_CASCADE_KEYS = {
    "oracle_budget": int,
    "phase2_fraction": float,
    "target_precision": float,
    "target_recall": float,
    "delta": float,
    "min_sample": int,
    "batch_rows": int,
    "bound": str,
}


def cascade_config(text: str | None, seed: int) -> tuple[CascadeConfig | None, dict[str, str]]:
    """Cascade settings plus model-name overrides (``proxy_model``, ``oracle_model``)."""
    pairs = parse_pairs(text)
    if not pairs:
        return None, {}
    models = {k: pairs.pop(k) for k in ("proxy_model", "oracle_model") if k in pairs}
    kwargs: dict[str, Any] = {}
    for k, v in pairs.items():
        if k not in _CASCADE_KEYS:
            raise ValueError(f"unknown cascade option {k!r}")
        kwargs[k] = _CASCADE_KEYS[k](v)
    kwargs.setdefault("oracle_budget", 0)
    return CascadeConfig(seed=seed, **kwargs), models


def _cell(v: Any) -> str:
    return "NULL" if v is None else render_value(v)


def format_table(table: Table, fmt: str) -> str:
    names = table.schema.names
    if fmt == "json":
        def js(v):
            return v.uri if isinstance(v, FileRef) else v

        return json.dumps([{n: js(v) for n, v in zip(names, row)} for row in table.rows], indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for row in table.rows:
            w.writerow(["" if v is None else render_value(v) for v in row])
        return buf.getvalue()
    cells = [[_cell(v) for v in row] for row in table.rows]
    widths = [max([len(n)] + [len(r[i]) for r in cells]) for i, n in enumerate(names)]
    lines = [" | ".join(n.ljust(w) for n, w in zip(names, widths)), "-+-".join("-" * w for w in widths)]
    lines += [" | ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.append(f"({len(cells)} row{'s' if len(cells) != 1 else ''})")
    return "\n".join(lines) + "\n"


def _read_sql(args) -> str:
    if args.sql_file:
        return Path(args.sql_file).read_text(encoding="utf-8")
    if args.sql is None:
        raise ValueError("give a SQL string or --sql-file")
    return args.sql


def _catalog(args) -> dict:
    if not args.tables:
        raise ValueError("--tables is required")
    return load_catalog(args.tables)


def _hints(args) -> dict:
    if not getattr(args, "hints", None):
        return {}
    return {str(k): float(v) for k, v in json.loads(Path(args.hints).read_text(encoding="utf-8")).items()}


def cmd_run(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        sql = _read_sql(args)
        catalog = _catalog(args)
        if not args.providers:
            raise ValueError("--providers is required")
        registry: ProviderRegistry = load_provider_config(args.providers)
        cfg = planner_config(args.optimizer, _hints(args))
        cascade, models = cascade_config(args.cascade, args.seed)
    except SQL_ERRORS as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SQL
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    options = ExecOptions(
        batch_size=args.batch_size,
        workers=args.workers,
        adaptive=not args.no_adaptive,
        cascade=cascade,
        context_window_tokens=cfg.context_window_tokens,
        agg_batch_tokens=cfg.agg_batch_tokens,
        selectivity_hints=cfg.selectivity_hints,
        **{k: v for k, v in models.items()},
    )
    stats = None
    try:
        _, plan = plan_query(sql, catalog, cfg)
        table, stats = execute(plan, catalog, registry, options)
    except SQL_ERRORS as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SQL
    except QueryAborted as exc:
        print(f"error: {exc}", file=err)
        _write_stats(args, exc.stats)
        return EXIT_PROVIDER
    except ProviderError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PROVIDER
    out.write(format_table(table, args.format))
    _write_stats(args, stats)
    return EXIT_OK


def _write_stats(args, stats) -> None:
    if args.stats and stats is not None:
        Path(args.stats).write_text(stats.to_json(timing=not args.no_timing) + "\n", encoding="utf-8")


def cmd_explain(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        sql = _read_sql(args)
        catalog = _catalog(args)
        cfg = planner_config(args.optimizer, _hints(args))
        baseline, optimized = plan_query(sql, catalog, cfg)
    except SQL_ERRORS as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SQL
    except ProviderError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PROVIDER
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    out.write(explain_with_total(baseline, "Baseline plan") + "\n\n")
    out.write(explain_with_total(optimized, "Optimized plan") + "\n")
    return EXIT_OK


def cmd_bench(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    from semql import bench

    try:
        doc = bench.load_scenario(args.scenario)
        if args.seed is not None:
            doc["seeds"] = [args.seed]
        cells = bench.run_scenario(doc)
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SQL
    except SQL_ERRORS as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SQL
    except (QueryAborted, ProviderError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PROVIDER
    text = bench.cells_csv(cells)
    speed = bench.speedup_table(cells, args.baseline)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        Path(args.out).with_suffix(".speedup.csv").write_text(speed, encoding="utf-8")
    else:
        out.write(text + "\n" + speed)
    return EXIT_OK


def cmd_ingest(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        dest = Path(args.tables)
        dest.mkdir(parents=True, exist_ok=True)
        for src in args.files:
            table = read_table(src, args.name if len(args.files) == 1 else None)
            target = dest / f"{table.name}.jsonl"
            write_jsonl(table, target)
            out.write(f"{table.name}: {len(table)} rows -> {target}\n")
    except (ValueError, OSError, PlanTypeError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags, which would collide with the SQL-error code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semql", description="Semantic SQL over in-memory tables.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def query_args(sp):
        sp.add_argument("sql", nargs="?", help="SQL text (or use --sql-file)")
        sp.add_argument("--sql-file")
        sp.add_argument("--tables", help="directory of .csv / .jsonl tables")
        sp.add_argument("--optimizer", default="", help="reorder=on,placement=auto,rewrite=on")
        sp.add_argument("--hints", help="JSON file mapping predicate SQL to selectivity")

    run = sub.add_parser("run", help="execute a query")
    query_args(run)
    run.add_argument("--providers", help="provider configuration JSON")
    run.add_argument("--cascade", default="", help="oracle_budget=N,target_precision=0.9,...")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--stats", help="write execution statistics JSON here")
    run.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from --stats")
    run.add_argument("--format", choices=("table", "csv", "json"), default="table")
    run.add_argument("--workers", type=int, default=4)
    run.add_argument("--batch-size", type=int, default=64)
    run.add_argument("--no-adaptive", action="store_true", help="disable runtime predicate reordering")
    run.set_defaults(fn=cmd_run)

    ex = sub.add_parser("explain", help="show baseline and optimized plans")
    query_args(ex)
    ex.set_defaults(fn=cmd_explain)

    b = sub.add_parser("bench", help="run a benchmark scenario")
    b.add_argument("scenario")
    b.add_argument("--out", help="CSV path; the speedup table goes next to it")
    b.add_argument("--seed", type=int)
    b.add_argument("--baseline", help="strategy used as the speedup reference")
    b.set_defaults(fn=cmd_bench)

    ing = sub.add_parser("ingest", help="convert CSV/JSONL files into a tables directory")
    ing.add_argument("files", nargs="+")
    ing.add_argument("--tables", required=True)
    ing.add_argument("--name")
    ing.set_defaults(fn=cmd_ingest)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
