import itertools
import math
import re

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from semql import scenarios as S
from semql.core import FileRef, Schema, Table, ValueKind
from semql.errors import LabelOverflow
from semql.exec import execute
from semql.models import ConsistentProvider, ProviderRegistry
from semql.parser import lower, parse
from semql.planner import (
    Classify,
    Filter,
    HeuristicOracle,
    Join,
    LlmOracle,
    PlannerConfig,
    PredicateProfile,
    PredKind,
    StatsView,
    detect_classify_rewrite,
    expected_cost,
    explain,
    label_chunk_size,
    order_predicates,
    place_ai_predicates,
    plan_query,
    profile_predicates,
    total_ai_calls,
)
from semql.planner.cost import binding_tables
from semql.planner.estimate import annotate
from semql.planner.plan import as_catalog, walk

T, I, F = ValueKind.TEXT, ValueKind.INT, ValueKind.FILE


def prof(pid, cost, sel, kind=PredKind.AI_TEXT):
    return PredicateProfile(pid, kind, cost, sel)


# -- profiles ------------------------------------------------------------------


@pytest.fixture(scope="module")
def docs_catalog():
    abstract = "x" * 800  # 200 tokens
    uri = "s3://" + "y" * 795  # 200 tokens
    papers = Table(
        "papers",
        Schema.of(("id", I), ("abstract", T), ("date", I), ("grp", I)),
        tuple((i, abstract, 2000 + i % 20, i % 10) for i in range(50)),
    )
    images = Table("imgs", Schema.of(("id", I), ("f", F)), tuple((i, FileRef(uri, "image/png")) for i in range(50)))
    return {"papers": papers, "imgs": images}


def profiles_for(sql, catalog, hints=None):
    plan = lower(parse(sql), catalog)
    return {p.pred_id: p for p in profile_predicates(plan, as_catalog(catalog), hints)}, plan


def test_between_is_cheap(docs_catalog):
    profs, _ = profiles_for("SELECT id FROM papers WHERE date BETWEEN 2010 AND 2015", docs_catalog)
    (p,) = profs.values()
    assert p.kind is PredKind.CHEAP and p.est_cost_per_row == 1 and p.est_selectivity == 0.3


def test_text_ai_cost_is_avg_tokens(docs_catalog):
    profs, _ = profiles_for("SELECT id FROM papers WHERE AI_FILTER(PROMPT('a {0}', abstract))", docs_catalog)
    (p,) = profs.values()
    assert p.kind is PredKind.AI_TEXT and p.est_cost_per_row == 200 and p.est_selectivity == 0.5


def test_image_ai_cost_ten_times(docs_catalog):
    profs, _ = profiles_for("SELECT id FROM imgs WHERE AI_FILTER(PROMPT('i {0}', f))", docs_catalog)
    (p,) = profs.values()
    assert p.kind is PredKind.AI_MULTIMODAL and p.est_cost_per_row == 2000


@pytest.mark.parametrize("items,expected", [("1, 2", 0.2), ("1, 2, 3, 4, 5", 0.5), (",".join(map(str, range(30))), 1.0)])
def test_in_selectivity(docs_catalog, items, expected):
    profs, _ = profiles_for(f"SELECT id FROM papers WHERE grp IN ({items})", docs_catalog)
    (p,) = profs.values()
    assert p.est_selectivity == pytest.approx(expected)


def test_hint_overrides(docs_catalog):
    sql = "SELECT id FROM papers WHERE AI_FILTER(PROMPT('a {0}', abstract))"
    profs, _ = profiles_for(sql, docs_catalog, {"AI_FILTER(PROMPT('a {0}', abstract))": 0.05})
    assert next(iter(profs.values())).est_selectivity == 0.05


# -- ordering --------------------------------------------------------------------


def test_order_cheap_first():
    cheap = prof(2, 1, 0.5, PredKind.CHEAP)
    ai = prof(1, 200, 0.5)
    assert [p.pred_id for p in order_predicates([ai, cheap])] == [2, 1]


def test_order_stable_ties():
    a, b = prof(1, 5, 0.5), prof(2, 5, 0.5)
    assert [p.pred_id for p in order_predicates([b, a])] == [1, 2]


def test_order_selective_expensive_first():
    a = prof(1, 1, 0.99)
    b = prof(2, 10, 0.01)
    assert [p.pred_id for p in order_predicates([a, b])] == [2, 1]
    assert expected_cost([b, a]) == pytest.approx(10 + 0.01 * 1)
    assert expected_cost([a, b]) == pytest.approx(1 + 0.99 * 10)


def test_selectivity_one_goes_last():
    assert [p.pred_id for p in order_predicates([prof(1, 0.1, 1.0), prof(2, 50, 0.9)])] == [2, 1]


@given(
    st.lists(
        st.tuples(st.floats(0.01, 1000), st.floats(0.0, 1.0)),
        min_size=1,
        max_size=5,
    )
)
def test_order_matches_brute_force(specs):
    profiles = [prof(i, c, s) for i, (c, s) in enumerate(specs)]
    best = min(expected_cost(perm) for perm in itertools.permutations(profiles))
    got = expected_cost(order_predicates(profiles))
    assert got <= best * (1 + 1e-9) + 1e-9


# -- papers and figures placement -------------------------------------------------------------


@pytest.fixture(scope="module")
def papers_plans():
    sc = S.papers_join()
    baseline, optimized = plan_query(sc.sql, sc.tables, PlannerConfig(selectivity_hints=sc.hints))
    return sc, baseline, optimized


def test_papers_totals(papers_plans):
    _, baseline, optimized = papers_plans
    assert total_ai_calls(baseline) == 110000
    assert total_ai_calls(optimized) == 330
    assert total_ai_calls(baseline) / total_ai_calls(optimized) == pytest.approx(333.3, abs=0.1)


def _papers_enumeration():
    """Every placement and order of the three conjuncts, costed independently.

    papers 100000 (ids distinct), images 10000 (ids distinct), one image row
    per surviving paper, date sel 0.003, text sel 0.1, image sel 0.5 (default).
    """
    n_p, n_i = 100000.0, 10000.0
    sel = {"date": 0.003, "text": 0.1, "image": 0.5}
    side = {"date": "p", "text": "p", "image": "i"}
    results = []
    for pos in itertools.product(["down", "up"], repeat=2):
        place = {"date": "down", "text": pos[0], "image": pos[1]}
        below = {s: [k for k in sel if side[k] == s and place[k] == "down"] for s in ("p", "i")}
        above = [k for k in sel if place[k] == "up"]
        for order_p in itertools.permutations(below["p"]):
            for order_i in itertools.permutations(below["i"]):
                for order_up in itertools.permutations(above):
                    calls = 0.0
                    rows = {"p": n_p, "i": n_i}
                    for s, order in (("p", order_p), ("i", order_i)):
                        for k in order:
                            if k != "date":
                                calls += rows[s]
                            rows[s] *= sel[k]
                    j = rows["p"] * rows["i"] / max(min(n_p, rows["p"]), min(n_i, rows["i"]))
                    for k in order_up:
                        calls += j
                        j *= sel[k]
                    results.append((calls, place, order_p, order_i, order_up))
    return results


def test_papers_enumeration_optimum_is_330(papers_plans):
    results = _papers_enumeration()
    assert min(r[0] for r in results) == pytest.approx(330)
    worst_pushdown = max(r[0] for r in results if r[1]["text"] == "down" and r[1]["image"] == "down")
    assert worst_pushdown == pytest.approx(110000)


@pytest.mark.parametrize("text,image", list(itertools.product(["down", "up"], repeat=2)))
def test_papers_explicit_placements_match_enumeration(papers_plans, text, image):
    sc, baseline, _ = papers_plans
    catalog = as_catalog(sc.tables)
    stats = StatsView(catalog, binding_tables(baseline))
    profiles = profile_predicates(baseline, catalog, sc.hints)
    ids = {("text" if "Abstract" in p.sql else "image"): p.id for p in _preds(baseline) if p.is_ai}
    plan = place_ai_predicates(baseline, profiles, stats, mode={ids["text"]: text, ids["image"]: image}, reorder=True)
    got = total_ai_calls(annotate(plan, stats, {p.pred_id: p for p in profiles}))
    best_same_placement = min(r[0] for r in _papers_enumeration() if r[1]["text"] == text and r[1]["image"] == image)
    assert got == pytest.approx(best_same_placement)


def _preds(plan):
    out = []
    for n in walk(plan):
        if isinstance(n, Filter):
            out.append(n.pred)
        if isinstance(n, Join) and n.ai_pred is not None:
            out.append(n.ai_pred)
    return out


def test_papers_optimized_pulls_image_filter_up(papers_plans):
    _, _, optimized = papers_plans
    top_filter = next(n for n in walk(optimized) if isinstance(n, Filter))
    assert "Image {0}" in top_filter.pred.sql
    assert isinstance(top_filter.child, Join)


EXPLAIN_LINE = re.compile(r"^(  )*\S.* \(rows=[0-9.]+, ai_calls=[0-9.]+\)$")


def test_explain_format(papers_plans):
    _, baseline, _ = papers_plans
    lines = explain(baseline).splitlines()
    assert all(EXPLAIN_LINE.match(l) for l in lines)
    assert lines[0].startswith("Project")
    depths = [(len(l) - len(l.lstrip(" "))) // 2 for l in lines]
    assert depths[0] == 0 and all(b - a <= 1 for a, b in zip(depths, depths[1:]))


@pytest.mark.parametrize("ratio,expected", [(0.1, "up"), (2.0, "down")])
def test_placement_ratio_direction(ratio, expected):
    sc = S.placement(ratio)
    _, optimized = plan_query(sc.sql, sc.tables)
    f = next((n for n in walk(optimized) if isinstance(n, Filter) and n.pred.is_ai), None)
    pulled_up = f is not None and isinstance(f.child, Join)
    assert ("up" if pulled_up else "down") == expected


@pytest.mark.parametrize("ratio", [0.1, 0.5, 1.0, 1.5, 2.0])
def test_auto_is_min_of_strategies(ratio):
    sc = S.placement(ratio)
    totals = {}
    for mode in ("auto", "pullup", "pushdown"):
        _, plan = plan_query(sc.sql, sc.tables, PlannerConfig(placement=mode, rewrite=False))
        totals[mode] = total_ai_calls(plan)
    assert totals["auto"] == min(totals["pullup"], totals["pushdown"])


# -- join rewrite -------------------------------------------------------------------


def _join(sc):
    plan = lower(parse(sc.sql), sc.tables)
    catalog = as_catalog(sc.tables)
    return next(n for n in walk(plan) if isinstance(n, Join)), StatsView(catalog, binding_tables(plan))


def test_detect_review_join():
    join, stats = _join(S.review_join())
    rw = detect_classify_rewrite(join, stats, HeuristicOracle())
    assert rw is not None and rw.label_side == "right"
    assert str(rw.label_column).lower() == "categories.label"


def test_no_rewrite_for_long_labels():
    desc = lambda k, i: f"Product {k}{i}: " + "durable stainless body with a long detailed description " * 5
    a = Table("a", Schema.of(("d", T),), tuple((desc("a", i),) for i in range(100)))
    b = Table("b", Schema.of(("d", T),), tuple((desc("b", i),) for i in range(100)))
    sql = "SELECT * FROM a JOIN b ON AI_FILTER(PROMPT('Product {0} is the same item as {1}', a.d, b.d))"
    sc = S.Scenario("em", {"a": a, "b": b}, sql, lambda: None)
    assert a.stats.column("d").avg_token_count > 60
    join, stats = _join(sc)
    assert detect_classify_rewrite(join, stats, HeuristicOracle()) is None
    _, optimized = plan_query(sql, sc.tables)
    assert not any(isinstance(n, Classify) for n in walk(optimized))


def test_no_rewrite_same_side_bindings():
    a = Table("a", Schema.of(("x", T), ("y", T)), (("p", "q"),))
    b = Table("b", Schema.of(("z", T),), (("c",),))
    sql = "SELECT * FROM a JOIN b ON AI_FILTER(PROMPT('Review {0} is mapped to category {1}', a.x, a.y))"
    sc = S.Scenario("same", {"a": a, "b": b}, sql, lambda: None)
    plan = lower(parse(sql), sc.tables)
    join = next((n for n in walk(plan) if isinstance(n, Join)), None)
    stats = StatsView(as_catalog(sc.tables), binding_tables(plan))
    if join is not None and join.ai_pred is not None:
        assert detect_classify_rewrite(join, stats, HeuristicOracle()) is None
    _, optimized = plan_query(sql, sc.tables)
    assert not any(isinstance(n, Classify) for n in walk(optimized))


class _FailingProvider:
    def invoke(self, req):
        from semql.errors import ProviderError

        raise ProviderError("down", retryable=False)


def test_llm_oracle_falls_back():
    join, stats = _join(S.review_join())
    oracle = LlmOracle(_FailingProvider())
    rw = detect_classify_rewrite(join, stats, oracle)
    assert rw is not None and oracle.fallbacks == 1


def test_review_join_estimates():
    sc = S.review_join()
    baseline, optimized = plan_query(sc.sql, sc.tables)
    assert total_ai_calls(baseline) == 24
    assert total_ai_calls(optimized) == 4
    assert "[rewritten: classify]" in explain(optimized)


@pytest.mark.parametrize("chunks,calls", [(2, 1000), (3, 1500)])
def test_table_scale_chunking(chunks, calls):
    sc = S.join_rewrite(500, 500, chunks=chunks)
    cfg = PlannerConfig(context_window_tokens=sc.params["context_window_tokens"])
    baseline, optimized = plan_query(sc.sql, sc.tables, cfg)
    assert total_ai_calls(baseline) == 250000
    assert total_ai_calls(optimized) == calls


def test_ample_window_still_capped_at_250_labels():
    sc = S.join_rewrite(500, 500, chunks=1)
    _, optimized = plan_query(sc.sql, sc.tables, PlannerConfig(context_window_tokens=100000))
    assert total_ai_calls(optimized) == 1000


def test_chunk_size_cap():
    assert label_chunk_size(10, 10, 1, 100000) == 250
    assert label_chunk_size(10, 10, 4, 100) == 20


def test_label_overflow():
    with pytest.raises(LabelOverflow):
        label_chunk_size(10, 10, 50, 60)
    sc = S.review_join()
    with pytest.raises(LabelOverflow):
        plan_query(sc.sql, sc.tables, PlannerConfig(context_window_tokens=30))


@pytest.mark.parametrize("n_rows,n_labels,chunk", [(7, 40, 9), (20, 20, 3), (3, 250, 250)])
def test_call_count_formula(n_rows, n_labels, chunk):
    sc = S.join_rewrite(n_rows, n_labels, chunks=1)
    window = sc.params["context_window_tokens"] - 2 * n_labels + 2 * chunk  # labels are 2 tokens each
    _, optimized = plan_query(sc.sql, sc.tables, PlannerConfig(context_window_tokens=window))
    cls = next(n for n in walk(optimized) if isinstance(n, Classify))
    assert cls.chunk_size == min(250, chunk)
    assert total_ai_calls(optimized) == n_rows * math.ceil(n_labels / cls.chunk_size)


@given(
    st.integers(1, 20),
    st.integers(1, 20),
    st.sets(st.tuples(st.integers(0, 19), st.integers(0, 19)), max_size=60),
    st.integers(1, 4),
)
def test_rewrite_equivalent_under_consistent_provider(n_rows, n_labels, matches, chunks):
    rows = tuple((i, f"review text {i}") for i in range(n_rows))
    labels = tuple((f"cat{j}",) for j in range(n_labels))
    pairs = {(f"review text {i}", f"cat{j}") for i, j in matches}
    truth = lambda v: (v[0], v[1]) in pairs
    tables = {
        "reviews": Table("reviews", Schema.of(("id", I), ("review", T)), rows),
        "categories": Table("categories", Schema.of(("label", T),), labels),
    }
    sql = "SELECT * FROM reviews JOIN categories ON AI_FILTER(PROMPT('Review {0} is mapped to category {1}', reviews.review, categories.label))"
    window = 200 if chunks == 1 else 60
    baseline, optimized = plan_query(sql, tables, PlannerConfig(context_window_tokens=window))
    assume(any(isinstance(n, Classify) for n in walk(optimized)))
    reg = lambda: ProviderRegistry({"default": ConsistentProvider("Review {0} is mapped to category {1}", truth, 1)})
    a, sa = execute(baseline, tables, reg())
    b, sb = execute(optimized, tables, reg())
    assert a.schema == b.schema
    assert a.rows == b.rows
    assert sa.ai_calls == n_rows * n_labels
    cls = next(n for n in walk(optimized) if isinstance(n, Classify))
    assert sb.ai_calls == n_rows * math.ceil(n_labels / cls.chunk_size)


# -- optimized never estimates more calls than the baseline -------------------------------


@st.composite
def join_scenarios(draw):
    n_l = draw(st.integers(5, 120))
    n_r = draw(st.integers(5, 120))
    d_l = draw(st.integers(1, n_l))
    d_r = draw(st.integers(1, n_r))
    words = "w" * 40  # ten tokens per value on both sides, so AI costs are equal
    left = Table("l", Schema.of(("k", I), ("g", I), ("t", T)), tuple((i % d_l, i % 10, f"{words}{i:04d}"[-40:]) for i in range(n_l)))
    right = Table("r", Schema.of(("k", I), ("g", I), ("t", T)), tuple((i % d_r, i % 10, f"{words}{i:04d}"[-40:]) for i in range(n_r)))
    where, hints = [], {}
    for side in ("l", "r"):
        if draw(st.booleans()):
            n = draw(st.integers(1, 9))
            where.append(f"{side}.g IN ({', '.join(str(x) for x in range(n))})")
        for j in range(draw(st.integers(0, 2))):
            pred = f"AI_FILTER(PROMPT('Side {side} test {j}: {{0}}', {side}.t))"
            where.append(pred)
            hints[pred] = draw(st.floats(0.01, 0.99))
    assume(any("AI_FILTER" in w for w in where))
    where = draw(st.permutations(where))
    sql = "SELECT l.k, r.k FROM l JOIN r ON l.k = r.k WHERE " + " AND ".join(where)
    return {"l": left, "r": right}, sql, hints


@given(join_scenarios())
def test_optimized_never_worse(scenario):
    tables, sql, hints = scenario
    baseline, optimized = plan_query(sql, tables, PlannerConfig(selectivity_hints=hints))
    assert total_ai_calls(optimized) <= total_ai_calls(baseline) + 1e-6


def test_rewrite_keeps_schema():
    sc = S.review_join()
    baseline, optimized = plan_query(sc.sql, sc.tables)
    from semql.planner import output_columns

    strip = lambda cols: [(c.name, c.kind) for c in cols]
    assert strip(output_columns(baseline)) == strip(output_columns(optimized))
