"""Benchmark harness: sweep a parameter, run every strategy, report call counts.

Scenario files are JSON. Two shapes are accepted::

    {"generator": "reorder", "sweep": {"param": "in_selectivity", "values": [0.1, 0.5]},
     "strategies": ["ai_first", "reordered"], "seeds": [0], "options": {}}

    {"tables": "tables/", "providers": "providers.json",
     "query": "SELECT ... WHERE id_group IN (${value}) AND AI_FILTER(...)",
     "sweep": {"param": "groups", "values": ["1", "1, 2"]}, "strategies": ["ai_first", "reordered"],
     "truth": {"column": "id", "values": [1, 2, 3]}}

Paths are relative to the scenario file. ``${value}`` in the query is
replaced by the sweep value.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from semql.cascade.state import CascadeConfig
from semql.core.ingest import load_catalog
from semql.errors import ScenarioParseError
from semql.exec.engine import ExecOptions, execute
from semql.models.registry import load_provider_config
from semql.planner.optimizer import PlannerConfig, plan_query
from semql.planner.plan import total_ai_calls
from semql import scenarios as S

CSV_COLUMNS = (
    "scenario",
    "param",
    "value",
    "strategy",
    "seed",
    "ai_calls",
    "est_ai_calls",
    "oracle_calls",
    "rows",
    "wall_ms",
    "precision",
    "recall",
    "f1",
)


@dataclass(frozen=True)
class Strategy:
    planner: dict = field(default_factory=dict)
    adaptive: bool = False
    cascade: str | None = None  # None, "proxy_only" or "cascade"
    baseline_plan: bool = False  # run the unoptimized plan


STRATEGIES: dict[str, Strategy] = {
    "baseline": Strategy(baseline_plan=True),
    "pushdown": Strategy({"placement": "pushdown", "rewrite": False}),
    "pullup": Strategy({"placement": "pullup", "rewrite": False}),
    "ai_aware": Strategy({"placement": "auto"}),
    "ai_first": Strategy({"reorder": False, "rewrite": False}),
    "reordered": Strategy({"reorder": True, "rewrite": False}),
    "adaptive": Strategy({"reorder": False, "rewrite": False}, adaptive=True),
    "cross_join": Strategy({"rewrite": False}),
    "rewrite": Strategy({"rewrite": True}),
    "oracle_only": Strategy(),
    "proxy_only": Strategy(cascade="proxy_only"),
    "cascade": Strategy(cascade="cascade"),
}

GENERATORS = ("papers", "reorder", "placement", "cascade", "rewrite")


@dataclass
class Cell:
    scenario: str
    param: str
    value: Any
    strategy: str
    seed: int
    ai_calls: int
    est_ai_calls: float
    oracle_calls: int
    rows: int
    wall_ms: float
    precision: float | None
    recall: float | None
    f1: float | None

    def row(self) -> list:
        def fmt(x):
            return "" if x is None else (f"{x:.6f}" if isinstance(x, float) else x)

        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fail(msg: str) -> ScenarioParseError:
    return ScenarioParseError(msg)


def load_scenario(path: str | os.PathLike) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise _fail(f"cannot read scenario {path}: {exc}") from None
    return validate_scenario(doc, path.parent)


def validate_scenario(doc: Any, base_dir: Path | None = None) -> dict:
    if not isinstance(doc, dict):
        raise _fail("scenario must be a JSON object")
    sweep = doc.get("sweep")
    if not isinstance(sweep, dict) or "param" not in sweep or not isinstance(sweep.get("values"), list):
        raise _fail("scenario needs sweep: {param, values: [...]}")
    if not sweep["values"]:
        raise _fail("sweep values must be non-empty")
    strategies = doc.get("strategies")
    if not isinstance(strategies, list) or not strategies:
        raise _fail("scenario needs a non-empty strategies list")
    unknown = [s for s in strategies if s not in STRATEGIES]
    if unknown:
        raise _fail(f"unknown strategies {unknown}; choose from {sorted(STRATEGIES)}")
    if "generator" in doc:
        if doc["generator"] not in GENERATORS:
            raise _fail(f"unknown generator {doc['generator']!r}; choose from {list(GENERATORS)}")
    elif not ("tables" in doc and "query" in doc and "providers" in doc):
        raise _fail("scenario needs either a generator or tables, providers and query")
    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise _fail("seeds must be a list of integers")
    out = dict(doc)
    out["seeds"] = seeds
    out["options"] = dict(doc.get("options", {}))
    out["_base"] = base_dir or Path(".")
    return out


def _generated(doc: dict, value: Any, seed: int) -> S.Scenario:
    gen, param, opts = doc["generator"], doc["sweep"]["param"], doc["options"]
    kwargs = {param: value}
    try:
        if gen == "papers":
            return S.papers_join(**{k: int(v) for k, v in kwargs.items()})
        if gen == "reorder":
            return S.nyt_reorder(float(value), ai_first=True, n_rows=int(opts.get("n_rows", 1000)))
        if gen == "placement":
            return S.placement(float(value), n_left=int(opts.get("n_left", 1000)))
        if gen == "rewrite":
            return S.join_rewrite(
                n_rows=int(opts.get("n_rows", value if param == "n_rows" else 100)),
                n_labels=int(opts.get("n_labels", value if param == "n_labels" else 100)),
                chunks=int(opts.get("chunks", 1)),
                seed=seed,
            )
        rate = float(value) if param == "positive_rate" else float(opts.get("positive_rate", 0.5))
        return S.cascade_docs(rate, seed=seed, n_rows=int(opts.get("n_rows", 2000)))
    except (TypeError, ValueError) as exc:
        raise _fail(f"bad sweep value {value!r} for {gen}: {exc}") from None


def _from_files(doc: dict, value: Any) -> S.Scenario:
    base = doc["_base"]
    tables = doc["tables"]
    if isinstance(tables, str):
        catalog = load_catalog(base / tables)
    elif isinstance(tables, dict):
        from semql.core.ingest import read_table

        catalog = {name: read_table(base / p, name) for name, p in tables.items()}
    else:
        raise _fail("tables must be a directory or a {name: path} object")
    providers_path = base / doc["providers"]
    truth = None
    if isinstance(doc.get("truth"), dict):
        truth = (doc["truth"]["column"], frozenset(doc["truth"]["values"]))
    return S.Scenario(
        "file",
        catalog,
        doc["query"].replace("${value}", str(value)),
        lambda: load_provider_config(providers_path),
        dict(doc.get("hints", {})),
        truth,
    )


def run_cell(sc: S.Scenario, strategy: str, seed: int, options: dict, clock: Callable[[], float] = time.perf_counter) -> Cell:
    st = STRATEGIES[strategy]
    window = int(options.get("context_window_tokens", sc.params.get("context_window_tokens", 8192)))
    cfg = PlannerConfig(selectivity_hints=sc.hints, context_window_tokens=window, **st.planner)
    baseline, optimized = plan_query(sc.sql, sc.tables, cfg)
    plan = baseline if st.baseline_plan else optimized
    cascade = None
    if st.cascade is not None:
        rows = max(len(t) for t in sc.tables.values())
        budget = 0 if st.cascade == "proxy_only" else int(options.get("oracle_budget", round(0.2 * rows)))
        cascade = CascadeConfig(budget, seed=seed)
    opts = ExecOptions(
        adaptive=st.adaptive,
        cascade=cascade,
        workers=int(options.get("workers", 1)),
        batch_size=int(options.get("batch_size", 64)),
    )
    start = clock()
    table, stats = execute(plan, sc.tables, sc.providers(), opts)
    wall = (clock() - start) * 1000.0
    p = r = f = None
    if sc.truth is not None:
        col, expected = sc.truth
        got = set(table.column(col)) if table.schema.has(col) else set()
        p, r, f = S.prf(got, set(expected))
    return Cell(
        sc.name,
        "",
        None,
        strategy,
        seed,
        stats.ai_calls,
        total_ai_calls(plan),
        sum(c.oracle_calls for c in stats.cascades),
        len(table),
        wall,
        p,
        r,
        f,
    )


def run_scenario(doc: dict) -> list[Cell]:
    cells = []
    param = doc["sweep"]["param"]
    for value in doc["sweep"]["values"]:
        for seed in doc["seeds"]:
            sc = _generated(doc, value, seed) if "generator" in doc else _from_files(doc, value)
            for strategy in doc["strategies"]:
                cell = run_cell(sc, strategy, seed, doc["options"])
                cells.append(replace(cell, param=param, value=value))
    return cells


def cells_csv(cells: list[Cell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in cells:
        w.writerow(c.row())
    return buf.getvalue()


def speedup_table(cells: list[Cell], baseline: str | None = None) -> str:
    """Call-count speedup of every strategy relative to ``baseline`` (first strategy by default)."""
    if not cells:
        return ""
    baseline = baseline or cells[0].strategy
    base = {(c.value, c.seed): c.ai_calls for c in cells if c.strategy == baseline}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("value", "seed", "strategy", "ai_calls", f"speedup_vs_{baseline}"))
    for c in cells:
        b = base.get((c.value, c.seed))
        speed = "" if b is None or c.ai_calls == 0 else f"{b / c.ai_calls:.3f}"
        w.writerow((c.value, c.seed, c.strategy, c.ai_calls, speed))
    return buf.getvalue()
