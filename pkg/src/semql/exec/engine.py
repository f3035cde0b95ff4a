"""Batch-at-a-time interpreter for optimized plans.

Rows travel as ``(key, values)`` pairs. The key is the tuple of base-table
row ids the row was built from; every operator emits rows sorted by key,
which makes output order independent of worker count and batch size.
"""

from __future__ import annotations

import math
import operator
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Sequence

from semql.agg import DEFAULT_BATCH_TOKENS, AggState
from semql.cascade.pipeline import phase1_proxy, run_cascade
from semql.cascade.state import CascadeConfig
from semql.core.prompt import classify_prompt, render_prompt
from semql.core.tokens import estimate_tokens
from semql.core.values import Column, ColumnRef, Schema, Table, ValueKind, compare_values, fl_is_image, kind_of, render_value
from semql.errors import PlanTypeError, ProviderError, QueryAborted, UnknownNameError
from semql.exec.reorder import DEFAULT_HYSTERESIS, DEFAULT_MIN_ROWS, DEFAULT_WINDOW, AdaptiveOrder
from semql.exec.stats import CascadeSummary, ExecStats, NodeStats, PredicateStats
from semql.models.base import ModelRequest, ModelResponse, Task
from semql.models.registry import ProviderRegistry, as_registry
from semql.parser import ast as A
from semql.planner.cost import StatsView, binding_tables, profile_predicate
from semql.planner.explain import describe
from semql.planner.plan import (
    Aggregate,
    Catalog,
    Classify,
    Filter,
    Join,
    PlanColumn,
    PlanNode,
    Predicate,
    Project,
    Scan,
    as_catalog,
    output_columns,
    walk,
)
from semql.planner.rewrite import label_chunk_size

Row = tuple[tuple, tuple]

_OPS: dict[str, Callable[[int], bool]] = {
    "=": lambda c: c == 0,
    "<>": lambda c: c != 0,
    "<": lambda c: c < 0,
    "<=": lambda c: c <= 0,
    ">": lambda c: c > 0,
    ">=": lambda c: c >= 0,
}


@dataclass
class ExecOptions:
    batch_size: int = 64
    workers: int = 4
    adaptive: bool = True
    cascade: CascadeConfig | None = None
    proxy_model: str = "proxy"
    oracle_model: str | None = None
    agg_batch_tokens: int = DEFAULT_BATCH_TOKENS
    context_window_tokens: int = 8192
    reorder_window: int = DEFAULT_WINDOW
    # rows per reorder decision; separate from batch_size so chunking never changes the plan
    reorder_batch_rows: int = 64
    reorder_min_rows: int = DEFAULT_MIN_ROWS
    hysteresis: float = DEFAULT_HYSTERESIS
    selectivity_hints: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.reorder_batch_rows < 1:
            raise ValueError("reorder_batch_rows must be positive")


def _cmp(a: Any, b: Any) -> int | None:
    # ints and floats compare numerically; other mixes are type errors
    num = (int, float)
    if isinstance(a, num) and isinstance(b, num) and not isinstance(a, bool) and not isinstance(b, bool):
        return (a > b) - (a < b)
    return compare_values(a, b)


def resolve_column(cols: Sequence[PlanColumn], ref: ColumnRef) -> int:
    name = ref.name.lower()
    hits = [i for i, c in enumerate(cols) if c.name.lower() == name]
    if ref.table is not None:
        q = ref.table.lower()
        hits = [i for i in hits if (cols[i].qualifier or "").lower() == q]
    elif len(hits) > 1:
        unqualified = [i for i in hits if cols[i].qualifier is None]
        hits = unqualified or [i for i in hits if not cols[i].hidden]
    if len(hits) != 1:
        kind = "unknown" if not hits else "ambiguous"
        raise UnknownNameError(f"{kind} column {ref}")
    return hits[0]


def _infer_kind(values: Sequence[Any]) -> ValueKind:
    for v in values:
        k = kind_of(v)
        if k is not None:
            return k
    return ValueKind.TEXT


class _Engine:
    def __init__(self, plan: PlanNode, catalog: Catalog, registry: ProviderRegistry, options: ExecOptions):
        self.plan = plan
        self.catalog = catalog
        self.registry = registry
        self.opts = options
        self.stats = ExecStats()
        self.view = StatsView(catalog, binding_tables(plan))
        self._node_stats: dict[int, NodeStats] = {}
        for i, n in enumerate(walk(plan)):
            ns = NodeStats(f"n{i}", describe(n))
            self.stats.nodes.append(ns)
            self._node_stats[id(n)] = ns
            preds = [n.pred] if isinstance(n, Filter) else [n.ai_pred] if isinstance(n, Join) and n.ai_pred else []
            for p in preds:
                self.stats.predicates[p.id] = PredicateStats(p.id, p.sql, p.is_ai)
        self._memo: dict[int, list[Row]] = {}
        self._pool: ThreadPoolExecutor | None = None

    # -- plumbing ---------------------------------------------------------

    def pmap(self, fn: Callable, items: Sequence) -> list:
        """Map over contiguous partitions on up to W workers, preserving order."""
        w = min(self.opts.workers, len(items))
        if w <= 1 or self._pool is None:
            return [fn(x) for x in items]
        size = math.ceil(len(items) / w)
        parts = [items[i : i + size] for i in range(0, len(items), size)]
        out = []
        for chunk in self._pool.map(lambda part: [fn(x) for x in part], parts):
            out.extend(chunk)
        return out

    def batches(self, rows: Sequence) -> list[Sequence]:
        b = self.opts.batch_size
        return [rows[i : i + b] for i in range(0, len(rows), b)]

    def call(
        self,
        node: PlanNode,
        task: Task,
        model: str | None,
        prompt: str,
        labels: Sequence[str] | None = None,
        pred: Predicate | None = None,
    ) -> ModelResponse:
        name, provider = self.registry.resolve(model)
        resp = provider.invoke(ModelRequest(task, name, prompt, tuple(labels) if labels is not None else None))
        ps = self.stats.predicates.get(pred.id) if pred is not None else None
        self.stats.count_call(self._node_stats[id(node)], ps, resp.usage[0])
        return resp

    def run(self) -> Table:
        before = {n: s.call_count for n, s in self.registry.all_stats().items()}
        hall = {n: s.label_hallucination for n, s in self.registry.all_stats().items()}
        try:
            if self.opts.workers > 1:
                with ThreadPoolExecutor(self.opts.workers) as pool:
                    self._pool = pool
                    rows = self.exec(self.plan)
            else:
                rows = self.exec(self.plan)
        except ProviderError as err:
            self._finish(before, hall)
            raise QueryAborted(err, self.stats) from err
        finally:
            self._pool = None
        self._finish(before, hall)
        return self._table(rows)

    def _finish(self, before: dict, hall: dict) -> None:
        for name, s in self.registry.all_stats().items():
            self.stats.provider_calls[name] = s.call_count - before.get(name, 0)
            self.stats.counters["label_hallucination"] += s.label_hallucination - hall.get(name, 0)

    def _table(self, rows: list[Row]) -> Table:
        cols = [c for c in output_columns(self.plan) if not c.hidden]
        idx = [i for i, c in enumerate(output_columns(self.plan)) if not c.hidden]
        data = [tuple(v[i] for i in idx) for _, v in rows]
        schema = []
        for j, c in enumerate(cols):
            kind = c.kind or _infer_kind([r[j] for r in data])
            schema.append(Column(c.name, kind))
        return Table("result", Schema(tuple(schema)), tuple(data))

    def exec(self, node: PlanNode) -> list[Row]:
        key = id(node)
        if key in self._memo:
            return self._memo[key]
        ns = self._node_stats[key]
        start = time.perf_counter()
        if isinstance(node, Scan):
            rows = self._scan(node, ns)
        elif isinstance(node, Filter):
            rows = self._filter_chain(node)
        elif isinstance(node, Join):
            rows = self._join(node, ns)
        elif isinstance(node, Classify):
            rows = self._classify(node, ns)
        elif isinstance(node, Project):
            rows = self._project(node, ns)
        elif isinstance(node, Aggregate):
            rows = self._aggregate(node, ns)
        else:
            raise PlanTypeError(f"cannot execute {type(node).__name__}")
        # children timed inside are included; wall_ms is inclusive
        ns.wall_ms += (time.perf_counter() - start) * 1000.0
        self._memo[key] = rows
        return rows

    # -- expressions ------------------------------------------------------

    def compile(self, expr, cols: Sequence[PlanColumn], node: PlanNode, pred: Predicate | None = None):
        """Turn an expression into ``values -> value``; AI calls go to the providers."""
        if isinstance(expr, A.Literal):
            v = expr.value
            return lambda row: v
        if isinstance(expr, ColumnRef):
            i = resolve_column(cols, expr)
            return operator.itemgetter(i)
        if isinstance(expr, A.Compare):
            lf, rf, test = self.compile(expr.left, cols, node), self.compile(expr.right, cols, node), _OPS[expr.op]

            def compare(row):
                c = _cmp(lf(row), rf(row))
                return None if c is None else test(c)

            return compare
        if isinstance(expr, A.Between):
            xf, lo, hi = (self.compile(e, cols, node) for e in (expr.expr, expr.low, expr.high))
            neg = expr.negated

            def between(row):
                x = xf(row)
                a, b = _cmp(x, lo(row)), _cmp(x, hi(row))
                if a is None or b is None:
                    return None
                return (a >= 0 and b <= 0) != neg

            return between
        if isinstance(expr, A.InList):
            xf = self.compile(expr.expr, cols, node)
            items = [self.compile(e, cols, node) for e in expr.items]
            neg = expr.negated

            def in_list(row):
                x = xf(row)
                if x is None:
                    return None
                unknown = False
                for f in items:
                    c = _cmp(x, f(row))
                    if c == 0:
                        return not neg
                    unknown |= c is None
                return None if unknown else neg

            return in_list
        if isinstance(expr, A.IsNull):
            xf, neg = self.compile(expr.expr, cols, node), expr.negated
            return lambda row: (xf(row) is None) != neg
        if isinstance(expr, A.FuncCall) and expr.name.upper() == "FL_IS_IMAGE":
            xf = self.compile(expr.args[0], cols, node)

            def is_image(row):
                v = xf(row)
                return None if v is None else fl_is_image(v)

            return is_image
        if isinstance(expr, A.AiCall):
            return self._compile_ai(expr, cols, node, pred)
        raise PlanTypeError(f"cannot evaluate {type(expr).__name__} here")

    def _bindings(self, call: A.AiCall, cols: Sequence[PlanColumn]):
        idx = [resolve_column(cols, b) for b in call.prompt.bindings]
        return lambda row: [row[i] for i in idx]

    def _compile_ai(self, call: A.AiCall, cols, node, pred):
        values_of = self._bindings(call, cols)
        model = call.model or call.option("model")
        if call.kind is A.AiKind.FILTER:

            def ai_filter(row):
                values = values_of(row)
                if any(v is None for v in values):
                    return False
                resp = self.call(node, Task.FILTER_BOOL, model, render_prompt(call.prompt, values), pred=pred)
                return bool(resp.bool_value)

            return ai_filter
        if call.kind is A.AiKind.COMPLETE:

            def ai_complete(row):
                values = values_of(row)
                if any(v is None for v in values):
                    return None
                return self.call(node, Task.COMPLETE, model, render_prompt(call.prompt, values)).text

            return ai_complete
        if call.kind is A.AiKind.CLASSIFY:
            return self._compile_classify(call, cols, node, values_of, model)
        raise PlanTypeError(f"{call.kind.value} is only valid as an aggregate")

    def _compile_classify(self, call, cols, node, values_of, model):
        if isinstance(call.labels, A.ArrayLit):
            fixed = [render_value(e.value) for e in call.labels.items]
            labels_of = lambda row: fixed  # noqa: E731
        else:
            li = resolve_column(cols, call.labels)
            labels_of = lambda row: [] if row[li] is None else [render_value(row[li])]  # noqa: E731
        instruction = call.instruction

        def ai_classify(row):
            values = values_of(row)
            if any(v is None for v in values):
                return None
            labels = list(dict.fromkeys(labels_of(row)))
            if not labels:
                return None
            text = render_prompt(call.prompt, values)
            prompt = f"{instruction}\n{text}" if instruction else text
            chunk = label_chunk_size(
                estimate_tokens(instruction or ""),
                estimate_tokens(text),
                max(estimate_tokens(l) for l in labels),
                self.opts.context_window_tokens,
            )
            hits: set[str] = set()
            for i in range(0, len(labels), chunk):
                resp = self.call(node, Task.CLASSIFY_MULTI, model, prompt, labels[i : i + chunk])
                hits.update(resp.labels or ())
            return ", ".join(l for l in labels if l in hits)

        return ai_classify

    # -- operators --------------------------------------------------------

    def _scan(self, node: Scan, ns: NodeStats) -> list[Row]:
        if node.table is None:
            rows = [((), ())]
        else:
            table = self.catalog.get(node.table)
            if table is None:
                raise UnknownNameError(f"unknown table {node.table!r}")
            idx = [table.schema.index(c.name) for c in node.columns]
            rows = [((i,), tuple(r[j] for j in idx)) for i, r in enumerate(table.rows)]
        ns.rows_in = ns.rows_out = len(rows)
        return rows

    def _cascade_config(self, pred: Predicate) -> CascadeConfig | None:
        call = pred.ai
        if call is None or call.kind is not A.AiKind.FILTER:
            return None
        flag = (call.option("cascade") or "").lower()
        if flag in ("off", "false", "0"):
            return None
        base = self.opts.cascade
        if base is None and flag not in ("on", "true", "1"):
            return None
        if base is None:
            base = CascadeConfig(oracle_budget=0)
        updates: dict[str, Any] = {}
        if call.option("oracle_budget") is not None:
            updates["oracle_budget"] = int(call.option("oracle_budget"))
        for key in ("target_precision", "target_recall"):
            if call.option(key) is not None:
                updates[key] = float(call.option(key))
        return replace(base, **updates) if updates else base

    def _filter_chain(self, top: Filter) -> list[Row]:
        chain: list[Filter] = []
        node: PlanNode = top
        while isinstance(node, Filter):
            chain.append(node)
            node = node.child
            if id(node) in self._memo or (isinstance(node, Filter) and self._shared(node)):
                break
        chain.reverse()  # evaluation order, innermost first
        rows = self.exec(node)
        if any(self._cascade_config(f.pred) for f in chain) or not self.opts.adaptive or len(chain) < 2:
            return self._filter_sequential(chain, rows)
        return self._filter_adaptive(chain, rows)

    def _shared(self, node: PlanNode) -> bool:
        return sum(1 for n in walk(self.plan) for c in n.children if c is node) > 1

    def _eval_filter(self, f: Filter, rows: Sequence[Row], cols) -> list[Row]:
        fn = self.compile(f.pred.expr, cols, f, f.pred)
        keep = self.pmap(lambda r: fn(r[1]) is True, rows)
        out = [r for r, k in zip(rows, keep) if k]
        self._record(f, len(rows), len(out))
        return out

    def _record(self, f: Filter, seen: int, passed: int) -> None:
        ns, ps = self._node_stats[id(f)], self.stats.predicates[f.pred.id]
        ns.rows_in += seen
        ns.rows_out += passed
        ps.rows_seen += seen
        ps.rows_passed += passed

    def _filter_sequential(self, chain: list[Filter], rows: list[Row]) -> list[Row]:
        cols = output_columns(chain[0])
        for f in chain:
            if self._cascade_config(f.pred) is not None:
                rows = self._cascade_filter(f, rows, cols)
            else:
                rows = [r for b in self.batches(rows) for r in self._eval_filter(f, b, cols)]
        return rows

    def _filter_adaptive(self, chain: list[Filter], rows: list[Row]) -> list[Row]:
        cols = output_columns(chain[0])
        by_id = {f.pred.id: f for f in chain}
        profiles = [profile_predicate(f.pred, self.view, self.opts.selectivity_hints) for f in chain]
        order = AdaptiveOrder(profiles, self.opts.reorder_window, self.opts.hysteresis, self.opts.reorder_min_rows)
        out: list[Row] = []
        step = self.opts.reorder_batch_rows
        for start in range(0, len(rows), step):
            batch = rows[start : start + step]
            seen: dict[int, tuple[int, int]] = {}
            survivors: Sequence[Row] = batch
            for pid in order.order:
                n_in = len(survivors)
                if n_in:
                    survivors = self._eval_filter(by_id[pid], survivors, cols)
                seen[pid] = (n_in, len(survivors))
            out.extend(survivors)
            order.observe(seen)
        self.stats.reorders += order.flips
        return out

    def _cascade_filter(self, f: Filter, rows: list[Row], cols) -> list[Row]:
        pred, call = f.pred, f.pred.ai
        config = self._cascade_config(pred)
        values_of = self._bindings(call, cols)
        proxy_model = call.option("proxy_model") or self.opts.proxy_model
        oracle_model = call.option("oracle_model") or call.model or self.opts.oracle_model
        prompts: dict[tuple, str] = {}
        for key, values in rows:
            vals = values_of(values)
            if all(v is not None for v in vals):
                prompts[key] = render_prompt(call.prompt, vals)
        todo = [(k, prompts[k]) for k, _ in rows if k in prompts]

        def proxy(row_id, prompt):
            resp = self.call(f, Task.FILTER_BOOL, proxy_model, prompt, pred=pred)
            return bool(resp.bool_value), resp.confidence

        def oracle(row_id):
            return bool(self.call(f, Task.FILTER_BOOL, oracle_model, prompts[row_id], pred=pred).bool_value)

        parts = self.batches(todo) if todo else []
        scored = [s for part in self.pmap(lambda p: phase1_proxy(p, proxy), parts) for s in part]
        result = run_cascade(scored, oracle, config)
        decisions = result.decisions()
        out = [r for r in rows if decisions.get(r[0], False)]
        self._record(f, len(rows), len(out))
        self.stats.cascades.append(
            CascadeSummary(
                pred.id,
                pred.sql,
                len(todo),
                result.proxy_calls,
                result.oracle_calls,
                config.oracle_budget,
                result.by_source(),
                result.state.tau_low,
                result.state.tau_high,
                result.counters.proxy_errors,
                result.counters.oracle_errors,
            )
        )
        self.stats.bump("proxy_errors", result.counters.proxy_errors)
        self.stats.bump("oracle_errors", result.counters.oracle_errors)
        return out

    def _join(self, node: Join, ns: NodeStats) -> list[Row]:
        left, right = self.exec(node.left), self.exec(node.right)
        lcols, rcols = output_columns(node.left), output_columns(node.right)
        if node.equi_keys:
            lk, rk = [], []
            for a, b in node.equi_keys:
                try:
                    li, ri = resolve_column(lcols, a), resolve_column(rcols, b)
                except UnknownNameError:
                    li, ri = resolve_column(lcols, b), resolve_column(rcols, a)
                lk.append(li)
                rk.append(ri)
            table: dict[tuple, list[Row]] = {}
            for r in right:
                k = tuple(r[1][i] for i in rk)
                if all(v is not None for v in k):
                    table.setdefault(k, []).append(r)
            pairs = []
            for l in left:
                k = tuple(l[1][i] for i in lk)
                if all(v is not None for v in k):
                    pairs.extend((l, r) for r in table.get(k, ()))
        else:
            pairs = [(l, r) for l in left for r in right]
        ns.rows_in = len(pairs)
        if node.ai_pred is not None and pairs:
            fn = self.compile(node.ai_pred.expr, lcols + rcols, node, node.ai_pred)
            keep = []
            for batch in self.batches(pairs):
                keep.extend(self.pmap(lambda p: fn(p[0][1] + p[1][1]) is True, batch))
            passed = [p for p, k in zip(pairs, keep) if k]
            ps = self.stats.predicates[node.ai_pred.id]
            ps.rows_seen += len(pairs)
            ps.rows_passed += len(passed)
            pairs = passed
        if node.swap_output:
            rows = [(r[0] + l[0], r[1] + l[1]) for l, r in pairs]
        else:
            rows = [(l[0] + r[0], l[1] + r[1]) for l, r in pairs]
        rows.sort(key=lambda r: r[0])
        ns.rows_out = len(rows)
        return rows

    def _classify(self, node: Classify, ns: NodeStats) -> list[Row]:
        rows = self.exec(node.child)
        label_rows = self.exec(node.labels)
        cols = output_columns(node.child)
        li = resolve_column(output_columns(node.labels), node.label_column)
        by_text: dict[str, Any] = {}
        for _, values in label_rows:
            v = values[li]
            if v is not None:
                by_text.setdefault(render_value(v), v)
        labels = list(by_text)
        ns.rows_in = len(rows)
        bound = {
            i: resolve_column(cols, b) for i, b in enumerate(node.prompt.bindings) if i != node.label_binding
        }
        chunk = max(1, node.chunk_size)

        def classify(row: Row) -> list[Row]:
            values = {i: row[1][j] for i, j in bound.items()}
            if not labels or any(v is None for v in values.values()):
                return []
            prompt = classify_prompt(node.prompt, values, node.label_binding, node.instruction)
            hits: set[str] = set()
            for s in range(0, len(labels), chunk):
                resp = self.call(node, Task.CLASSIFY_MULTI, node.model, prompt, labels[s : s + chunk])
                hits.update(resp.labels or ())
            return [(row[0], row[1] + (by_text[l],)) for l in labels if l in hits]

        out: list[Row] = []
        for batch in self.batches(rows):
            for produced in self.pmap(classify, batch):
                out.extend(produced)
        ns.rows_out = len(out)
        return out

    def _project(self, node: Project, ns: NodeStats) -> list[Row]:
        rows = self.exec(node.child)
        cols = output_columns(node.child)
        fns = [self.compile(e, cols, node) for e, _ in node.items]
        ns.rows_in = len(rows)
        out: list[Row] = []
        for batch in self.batches(rows):
            out.extend(self.pmap(lambda r: (r[0], tuple(f(r[1]) for f in fns)), batch))
        ns.rows_out = len(out)
        return out

    def _aggregate(self, node: Aggregate, ns: NodeStats) -> list[Row]:
        rows = self.exec(node.child)
        cols = output_columns(node.child)
        ns.rows_in = len(rows)
        key_fns = [self.compile(e, cols, node) for e, _ in node.group_keys]
        keys: list[tuple] = []
        for batch in self.batches(rows):
            keys.extend(self.pmap(lambda r: tuple(f(r[1]) for f in key_fns), batch))
        groups: dict[tuple, list[Row]] = {}
        if not node.group_keys:
            groups[()] = []
        for k, r in zip(keys, rows):
            groups.setdefault(k, []).append(r)
        evaluators = [self._agg_fn(e, cols, node) for e, _ in node.aggs]
        items = list(groups.items())
        results = self.pmap(lambda kv: tuple(ev(kv[1]) for ev in evaluators), items)
        out = [((i,), k + vals) for i, ((k, _), vals) in enumerate(zip(items, results))]
        ns.rows_out = len(out)
        return out

    def _agg_fn(self, expr, cols, node: Aggregate) -> Callable[[list[Row]], Any]:
        if isinstance(expr, A.FuncCall) and expr.name.upper() == "COUNT":
            if not expr.args or isinstance(expr.args[0], A.Star):
                return len
            xf = self.compile(expr.args[0], cols, node)
            return lambda rows: sum(1 for r in rows if xf(r[1]) is not None)
        if isinstance(expr, A.AiCall) and expr.kind in A.AGGREGATE_KINDS:
            values_of = self._bindings(expr, cols)
            model = expr.model or expr.option("model")
            instruction = expr.instruction

            def llm(task: Task, prompt: str) -> str:
                return self.call(node, task, model, prompt).text

            def run(rows: list[Row]) -> str:
                state = AggState(llm, self.opts.agg_batch_tokens, instruction)
                for r in rows:
                    vals = values_of(r[1])
                    if all(v is not None for v in vals):
                        state.push(render_prompt(expr.prompt, vals))
                text = state.finalize()
                self.stats.bump("truncations", state.truncations)
                return text

            return run
        raise PlanTypeError(f"unsupported aggregate {expr!r}")


def execute(
    plan: PlanNode,
    catalog,
    providers,
    options: ExecOptions | None = None,
) -> tuple[Table, ExecStats]:
    """Run ``plan`` and return the result table with execution statistics.

    ``providers`` is a registry, a single provider, or a name-to-provider
    mapping. A provider failure that survives retries raises
    :class:`~semql.errors.QueryAborted` carrying the partial statistics.
    """
    engine = _Engine(plan, as_catalog(catalog), as_registry(providers), options or ExecOptions())
    table = engine.run()
    return table, engine.stats
