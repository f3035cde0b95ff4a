"""Synthetic datasets with deterministic providers, shared by the benchmark harness and tests.

Each builder returns a :class:`Scenario`: tables, a query, planner hints and
a factory for fresh providers (so per-run call counters start at zero).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from semql.core.ingest import write_jsonl
from semql.core.values import FileRef, Schema, Table, ValueKind
from semql.models.base import ModelResponse, Task, request_digest
from semql.models.registry import ProviderRegistry
from semql.models.scripted import ScriptedProvider
from semql.models.synthetic import AccuracyProfile, ConsistentProvider, ORACLE, SyntheticBooleanProvider, hash_uniform
from semql.core.tokens import estimate_tokens
from semql.planner.rewrite import DEFAULT_CLASSIFY_INSTRUCTION, instruction_tokens

T, I, F, X = ValueKind.TEXT, ValueKind.INT, ValueKind.FILE, ValueKind.BOOL


@dataclass
class Scenario:
    name: str
    tables: dict[str, Table]
    sql: str
    providers: Callable[[], ProviderRegistry]
    hints: dict[str, float] = field(default_factory=dict)
    # expected result keys for quality metrics: (result column, set of values)
    truth: tuple[str, frozenset] | None = None
    params: dict = field(default_factory=dict)


def _filter_script(prompts: Mapping[str, bool], model: str) -> dict:
    table = {}
    for prompt, ok in prompts.items():
        resp = ModelResponse(text="true" if ok else "false", bool_value=ok, confidence=1.0)
        table[(Task.FILTER_BOOL.value, model, request_digest(prompt))] = resp
    return table


# -- predicate placement example ---------------------------------------------

PAPERS_TEXT = "Abstract {0} discusses energy efficiency in database systems"
PAPERS_IMAGE = "Image {0} shows energy consumption of different systems using the TPC-H workload"
PAPERS_SQL = f"""SELECT p.id, p.title
FROM papers p JOIN paper_images i ON p.id = i.id
WHERE AI_FILTER(PROMPT('{PAPERS_TEXT}', p.abstract))
  AND p.date BETWEEN 2010 AND 2015
  AND AI_FILTER(PROMPT('{PAPERS_IMAGE}', i.image_file))"""
PAPERS_HINTS = {
    "p.date BETWEEN 2010 AND 2015": 0.003,
    f"AI_FILTER(PROMPT('{PAPERS_TEXT}', p.abstract))": 0.1,
}


def papers_join(n_papers: int = 100_000, n_images: int = 10_000, in_range: int = 300) -> Scenario:
    """Papers and their figures: ``in_range`` papers fall in the date window,
    a tenth of those discuss energy efficiency, and every paper in the window
    has exactly one image row.
    """
    step = n_papers // in_range
    papers, energy = [], {}
    window_ids = []
    for i in range(n_papers):
        qualified = i % step == 0 and i // step < in_range
        if qualified:
            window_ids.append(i)
            date = 2010 + (i // step) % 6
            on_topic = (i // step) % 10 == 0
        else:
            date = 1990 + i % 20
            on_topic = i % 10 == 1
        topic = "energy efficiency of database engines" if on_topic else f"graph partitioning heuristics, part {i % 97}"
        abstract = f"We study {topic} and report results on benchmark suite {i % 13}."
        papers.append((i, f"Paper {i}", abstract, date))
        energy[abstract] = on_topic
    image_ids = list(window_ids)
    i = 1
    while len(image_ids) < n_images:
        if not (i % step == 0 and i // step < in_range):
            image_ids.append(i)
        i += 7
    images, tpch = [], {}
    for j, pid in enumerate(image_ids):
        ref = FileRef(f"s3://papers/figures/{j}.png", "image/png", 2048)
        images.append((pid, ref))
        tpch[ref.uri] = j % 3 != 2
    tables = {
        "papers": Table("papers", Schema.of(("id", I), ("title", T), ("abstract", T), ("date", I)), tuple(papers)),
        "paper_images": Table("paper_images", Schema.of(("id", I), ("image_file", F)), tuple(images)),
    }
    prompts = {PAPERS_TEXT.replace("{0}", a): ok for a, ok in energy.items()}
    prompts.update({PAPERS_IMAGE.replace("{0}", u): ok for u, ok in tpch.items()})
    script = _filter_script(prompts, "default")
    expected = frozenset(
        pid for (pid, ref) in images if tpch[ref.uri] and energy[papers[pid][2]] and 2010 <= papers[pid][3] <= 2015
    )
    return Scenario(
        "papers",
        tables,
        PAPERS_SQL,
        lambda: ProviderRegistry({"default": ScriptedProvider(script, name="default")}),
        dict(PAPERS_HINTS),
        ("id", expected),
    )


# -- semantic join examples ------------------------------------------------------

JOIN_TEMPLATE = "Review {0} is mapped to category {1}"
REVIEW_JOIN_SQL = f"""SELECT * FROM
Reviews JOIN Categories
ON AI_FILTER(PROMPT('{JOIN_TEMPLATE}', Reviews.review, Categories.label))"""

_REVIEWS = [
    "The headphones sound great but the battery dies after two hours.",
    "A gripping mystery novel, I finished it in one weekend.",
    "This jacket kept me warm on a winter hike and fits well.",
    "The blender is loud and the lid cracked in the first week.",
]
_CATEGORIES = ["Electronics", "Books", "Clothing", "Kitchen", "Outdoors", "Toys"]
_MATCHES = {(0, "Electronics"), (1, "Books"), (2, "Clothing"), (2, "Outdoors"), (3, "Kitchen"), (3, "Electronics")}


def review_join() -> Scenario:
    reviews = Table("reviews", Schema.of(("id", I), ("review", T)), tuple(enumerate(_REVIEWS)))
    categories = Table("categories", Schema.of(("label", T),), tuple((c,) for c in _CATEGORIES))
    pairs = {(_REVIEWS[i], c) for i, c in _MATCHES}

    def truth(values: dict[int, str]) -> bool:
        return (values[0], values[1]) in pairs

    return Scenario(
        "review_join",
        {"reviews": reviews, "categories": categories},
        REVIEW_JOIN_SQL,
        lambda: ProviderRegistry({"default": ConsistentProvider(JOIN_TEMPLATE, truth, label_index=1, name="default")}),
        truth=("id", frozenset(i for i, _ in _MATCHES)),
    )


def join_rewrite(n_rows: int = 500, n_labels: int = 500, chunks: int = 3, seed: int = 0) -> Scenario:
    """Square semantic join whose label side needs ``chunks`` classification calls per row.

    ``params['context_window_tokens']`` is the window that yields that chunking.
    """
    rows = tuple((i, f"Article {i} on topic {hash_uniform(seed, 'topic', i):.6f}") for i in range(n_rows))
    labels = tuple((f"t{j:04d}",) for j in range(n_labels))

    def truth(values: dict[int, str]) -> bool:
        text, label = values[0], values[1]
        i, j = int(text.split()[1]), int(label[1:])
        return j == i % n_labels or hash_uniform(seed, "match", i, j) < 2.0 / n_labels

    per_label = max(estimate_tokens(l[0]) for l in labels)
    per_chunk = -(-n_labels // chunks)
    room = per_chunk * per_label
    window = (
        instruction_tokens(JOIN_TEMPLATE, DEFAULT_CLASSIFY_INSTRUCTION)
        + max(estimate_tokens(r[1]) for r in rows)
        + room
    )
    sql = (
        "SELECT r.id, c.label FROM reviews r JOIN categories c "
        f"ON AI_FILTER(PROMPT('{JOIN_TEMPLATE}', r.review, c.label))"
    )
    return Scenario(
        f"join_rewrite_{n_rows}x{n_labels}",
        {
            "reviews": Table("reviews", Schema.of(("id", I), ("review", T)), rows),
            "categories": Table("categories", Schema.of(("label", T),), labels),
        },
        sql,
        lambda: ProviderRegistry({"default": ConsistentProvider(JOIN_TEMPLATE, truth, label_index=1, name="default")}),
        params={"context_window_tokens": window, "truth_fn": truth},
    )


# -- predicate reordering (IN list plus a text AI filter) ------------------------

NYT_TEMPLATE = "The article title is about finance: {0}"


def nyt_reorder(in_selectivity: float = 0.1, n_rows: int = 1000, groups: int = 10, ai_first: bool = True) -> Scenario:
    """``n_rows`` articles spread over ``groups`` groups; the IN list keeps a fraction of them."""
    kept = max(1, round(in_selectivity * groups))
    rows, finance = [], {}
    for i in range(n_rows):
        title = f"{'Markets rally as rates fall' if i % 3 == 0 else 'Local team wins the cup'} (story {i})"
        rows.append((i, 1990 + i % 30, title, i % groups))
        finance[title] = i % 3 == 0
    in_list = ", ".join(str(g) for g in range(kept))
    ai = f"AI_FILTER(PROMPT('{NYT_TEMPLATE}', title), {{'model': 'llama3.1-70b'}})"
    cheap = f"id_group IN ({in_list})"
    where = f"{ai} AND {cheap}" if ai_first else f"{cheap} AND {ai}"
    sql = f"SELECT id, year, title FROM nyt_articles WHERE {where}"
    prompts = {NYT_TEMPLATE.replace("{0}", t): ok for t, ok in finance.items()}
    script = _filter_script(prompts, "llama3.1-70b")
    expected = frozenset(r[0] for r in rows if r[3] < kept and finance[r[2]])
    table = Table("nyt_articles", Schema.of(("id", I), ("year", I), ("title", T), ("id_group", I)), tuple(rows))
    return Scenario(
        f"reorder_{in_selectivity}",
        {"nyt_articles": table},
        sql,
        lambda: ProviderRegistry({"default": ScriptedProvider(script, name="default")}),
        truth=("id", expected),
        params={"in_selectivity": kept / groups},
    )


# -- AI filter placement relative to a join --------------------------------------

def placement(ratio: float, n_left: int = 1000) -> Scenario:
    """Join whose output has ``ratio * n_left`` rows; every right row matches one left row."""
    n_right = max(1, round(ratio * n_left))
    left, finance = [], {}
    for i in range(n_left):
        title = f"{'Bond yields climb' if i % 4 == 0 else 'New museum opens'} (v1 story {i})"
        left.append((i, title))
        finance[title] = i % 4 == 0
    right = tuple((j, j % n_left, f"v2 story {j}") for j in range(n_right))
    sql = (
        "SELECT l.id, r.rid FROM nyt_articles_v1 AS l JOIN nyt_articles_v2 AS r "
        f"ON l.id = r.id AND AI_FILTER(PROMPT('{NYT_TEMPLATE}', l.title), {{'model': 'llama3.1-70b'}})"
    )
    prompts = {NYT_TEMPLATE.replace("{0}", t): ok for t, ok in finance.items()}
    script = _filter_script(prompts, "llama3.1-70b")
    matched = {r[1] for r in right}
    expected = frozenset(i for i, t in left if finance[t] and i in matched)
    return Scenario(
        f"placement_{ratio}",
        {
            "nyt_articles_v1": Table("nyt_articles_v1", Schema.of(("id", I), ("title", T)), tuple(left)),
            "nyt_articles_v2": Table("nyt_articles_v2", Schema.of(("rid", I), ("id", I), ("body", T)), right),
        },
        sql,
        lambda: ProviderRegistry({"default": ScriptedProvider(script, name="default")}),
        truth=("id", expected),
        params={"ratio": ratio},
    )


# -- proxy/oracle cascade ----------------------------------------------------------

CASCADE_TEMPLATE = "Document {0} reports a product defect"


def cascade_docs(
    positive_rate: float,
    seed: int = 0,
    n_rows: int = 2000,
    proxy: AccuracyProfile = AccuracyProfile(0.8),
) -> Scenario:
    """Binary relevance data; the proxy errs per its profile, the oracle never does."""
    rows, truth = [], {}
    for i in range(n_rows):
        text = f"doc-{seed}-{i}"
        label = hash_uniform(seed, "t", positive_rate, i) < positive_rate
        rows.append((i, text, label))
        truth[CASCADE_TEMPLATE.replace("{0}", text)] = label
    sql = f"SELECT id FROM docs WHERE AI_FILTER(PROMPT('{CASCADE_TEMPLATE}', body))"

    def providers() -> ProviderRegistry:
        return ProviderRegistry(
            {
                "oracle": SyntheticBooleanProvider(truth, ORACLE, seed, name="oracle"),
                "proxy": SyntheticBooleanProvider(truth, proxy, seed, name="proxy"),
            },
            default="oracle",
        )

    return Scenario(
        f"cascade_{positive_rate}_{seed}",
        {"docs": Table("docs", Schema.of(("id", I), ("body", T), ("label", X)), tuple(rows))},
        sql,
        providers,
        truth=("id", frozenset(r[0] for r in rows if r[2])),
        params={"positive_rate": positive_rate, "seed": seed},
    )


def export_scenario(sc: Scenario, directory) -> Path:
    """Write tables as JSONL plus a scripted fixture and provider config for the CLI.

    Only scenarios backed by scripted providers can be exported.
    """
    out = Path(directory)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    for name, table in sc.tables.items():
        write_jsonl(Table(name, table.schema, table.rows), out / "tables" / f"{name}.jsonl")
    registry = sc.providers()
    entries = []
    for name, provider in registry.providers.items():
        if not isinstance(provider, ScriptedProvider):
            raise TypeError(f"provider {name!r} is not scripted and cannot be exported")
        fixture = out / f"{name}.fixture.jsonl"
        with open(fixture, "w", encoding="utf-8") as fh:
            for (task, model, digest), resp in sorted(provider.table.items()):
                rec = {"task": task, "model": model, "digest": digest, "response": resp.to_dict()}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        entries.append({"name": name, "kind": "scripted", "params": {"fixture": fixture.name}})
    doc = {"providers": entries, "default": registry.default}
    (out / "providers.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    (out / "query.sql").write_text(sc.sql + "\n", encoding="utf-8")
    if sc.hints:
        (out / "hints.json").write_text(json.dumps(sc.hints, indent=2) + "\n", encoding="utf-8")
    return out


def prf(predicted: set, expected: set) -> tuple[float, float, float]:
    """Precision, recall and F1 of a predicted key set; empty-vs-empty scores 1."""
    tp = len(predicted & expected)
    if not predicted and not expected:
        return 1.0, 1.0, 1.0
    p = tp / len(predicted) if predicted else 0.0
    r = tp / len(expected) if expected else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


__all__ = [
    "PAPERS_HINTS",
    "PAPERS_SQL",
    "Scenario",
    "cascade_docs",
    "export_scenario",
    "papers_join",
    "join_rewrite",
    "review_join",
    "nyt_reorder",
    "placement",
    "prf",
]
