import json
import subprocess
import sys

import pytest

from semql import scenarios as S
from semql.cli import main



@pytest.fixture(scope="module")
def papers_dir(tmp_path_factory):
    return S.export_scenario(S.papers_join(), tmp_path_factory.mktemp("papers"))


@pytest.fixture(scope="module")
def nyt_dir(tmp_path_factory):
    sc = S.nyt_reorder(0.3, n_rows=1000, ai_first=False)
    return S.export_scenario(sc, tmp_path_factory.mktemp("nyt"))


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def totals(text):
    import re

    return [int(x) for x in re.findall(r"total ai_calls=(\d+)", text)]


def test_explain_papers_totals(capsys, papers_dir):
    code, out, _ = cli(capsys, "explain", "--sql-file", papers_dir / "query.sql", "--tables", papers_dir / "tables", "--hints", papers_dir / "hints.json")
    assert code == 0
    assert totals(out) == [110000, 330]
    assert out.startswith("Baseline plan")
    assert "\nOptimized plan" in out


def test_run_papers_matches_estimate(capsys, papers_dir, tmp_path):
    stats = tmp_path / "s.json"
    code, out, _ = cli(
        capsys, "run", "--sql-file", papers_dir / "query.sql", "--tables", papers_dir / "tables", "--hints", papers_dir / "hints.json",
        "--providers", papers_dir / "providers.json", "--stats", stats, "--no-timing", "--format", "json",
    )
    assert code == 0
    doc = json.loads(stats.read_text())
    assert doc["ai_calls"] == 330
    rows = json.loads(out)
    assert {r["id"] for r in rows} == set(S.papers_join().truth[1])


def test_run_nyt_query_counts_in_survivors(capsys, nyt_dir, tmp_path):
    stats = tmp_path / "s.json"
    code, out, _ = cli(
        capsys, "run", "--sql-file", nyt_dir / "query.sql", "--tables", nyt_dir / "tables",
        "--providers", nyt_dir / "providers.json", "--stats", stats, "--format", "csv",
    )
    assert code == 0
    assert json.loads(stats.read_text())["ai_calls"] == 300
    assert out.splitlines()[0] == "id,year,title"
    assert len(out.splitlines()) == 1 + 100


def test_run_is_byte_identical(capsys, nyt_dir, tmp_path):
    outs = []
    for i in range(2):
        stats = tmp_path / f"s{i}.json"
        code, out, _ = cli(
            capsys, "run", "--sql-file", nyt_dir / "query.sql", "--tables", nyt_dir / "tables",
            "--providers", nyt_dir / "providers.json", "--stats", stats, "--no-timing", "--seed", "5",
        )
        assert code == 0
        outs.append((out, stats.read_bytes()))
    assert outs[0] == outs[1]


def test_malformed_sql_exit_2(capsys, nyt_dir):
    code, _, err = cli(capsys, "run", "SELECT FROM WHERE", "--tables", nyt_dir / "tables", "--providers", nyt_dir / "providers.json")
    assert code == 2 and err.startswith("error:")


def test_unknown_column_exit_2(capsys, nyt_dir):
    code, _, _ = cli(capsys, "explain", "SELECT nope FROM nyt_articles", "--tables", nyt_dir / "tables")
    assert code == 2


def test_missing_fixture_entry_exit_3(capsys, nyt_dir):
    sql = "SELECT id FROM nyt_articles WHERE AI_FILTER(PROMPT('Unscripted question {0}', title))"
    code, _, err = cli(capsys, "run", sql, "--tables", nyt_dir / "tables", "--providers", nyt_dir / "providers.json", "--workers", "1")
    assert code == 3 and "error" in err


def test_provider_error_writes_partial_stats(capsys, nyt_dir, tmp_path):
    from semql.models.base import request_digest

    # script only the first five rows; the sixth call fails
    titles = S.nyt_reorder(0.3, n_rows=1000).tables["nyt_articles"].column("title")[:5]
    with open(tmp_path / "partial.jsonl", "w") as fh:
        for t in titles:
            rec = {"task": "FilterBool", "model": "default", "digest": request_digest(f"Finance? {t}"),
                   "response": {"text": "true", "bool_value": True, "confidence": 1.0}}
            fh.write(json.dumps(rec) + "\n")
    (tmp_path / "providers.json").write_text(
        json.dumps({"providers": [{"name": "default", "kind": "scripted", "params": {"fixture": "partial.jsonl"}}]})
    )
    stats = tmp_path / "s.json"
    sql = "SELECT id FROM nyt_articles WHERE AI_FILTER(PROMPT('Finance? {0}', title))"
    code, _, _ = cli(capsys, "run", sql, "--tables", nyt_dir / "tables", "--providers", tmp_path / "providers.json",
                     "--stats", stats, "--workers", "1")
    assert code == 3
    assert json.loads(stats.read_text())["ai_calls"] == 5


def test_usage_errors_exit_1(capsys, nyt_dir):
    assert cli(capsys, "run", "SELECT 1")[0] == 1  # no --tables
    assert cli(capsys, "explain", "SELECT 1", "--tables", nyt_dir / "tables", "--optimizer", "warp=on")[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 1


def test_explain_no_ai_identical_plans(capsys, nyt_dir):
    code, out, _ = cli(capsys, "explain", "SELECT id FROM nyt_articles WHERE year > 2000", "--tables", nyt_dir / "tables")
    base, opt = out.split("\n\n", 1)
    assert code == 0
    assert base.splitlines()[1:] == opt.strip().splitlines()[1:]


def test_explain_rewrite_annotation(capsys, tmp_path):
    sc = S.review_join()
    tables = tmp_path / "tables"
    tables.mkdir()
    from semql.core.ingest import write_jsonl

    for name, t in sc.tables.items():
        write_jsonl(t, tables / f"{name}.jsonl")
    code, out, _ = cli(capsys, "explain", sc.sql, "--tables", tables)
    assert code == 0
    assert "[rewritten: classify]" in out
    assert totals(out) == [24, 4]


def test_cascade_run(capsys, tmp_path):
    sc = S.cascade_docs(0.5, seed=2, n_rows=300)
    tables = tmp_path / "tables"
    tables.mkdir()
    from semql.core.ingest import write_jsonl

    write_jsonl(sc.tables["docs"], tables / "docs.jsonl")
    truth = {S.CASCADE_TEMPLATE.replace("{0}", r[1]): r[2] for r in sc.tables["docs"].rows}
    (tmp_path / "truth.json").write_text(json.dumps(truth))
    providers = {
        "default": "oracle",
        "providers": [
            {"name": "oracle", "kind": "synthetic", "params": {"ground_truth": "truth.json", "seed": 2}},
            {"name": "proxy", "kind": "synthetic", "params": {"ground_truth": "truth.json", "seed": 2, "profile": {"p_correct": 0.8}}},
        ],
    }
    (tmp_path / "providers.json").write_text(json.dumps(providers))
    stats = tmp_path / "s.json"
    code, _, _ = cli(
        capsys, "run", sc.sql, "--tables", tables, "--providers", tmp_path / "providers.json",
        "--cascade", "oracle_budget=60,proxy_model=proxy,oracle_model=oracle", "--stats", stats,
    )
    assert code == 0
    (summary,) = json.loads(stats.read_text())["cascade"]
    assert summary["proxy_calls"] == 300 and summary["oracle_calls"] <= 60


def test_ingest(capsys, tmp_path):
    src = tmp_path / "people.csv"
    src.write_text("id,name,score\n1,ann,2.5\n2,bo,3\n")
    code, out, _ = cli(capsys, "ingest", src, "--tables", tmp_path / "tables")
    assert code == 0 and "people: 2 rows" in out
    code, out, _ = cli(capsys, "explain", "SELECT name FROM people WHERE score > 2.6", "--tables", tmp_path / "tables")
    assert code == 0


def test_ingest_missing_file(capsys, tmp_path):
    assert cli(capsys, "ingest", tmp_path / "nope.csv", "--tables", tmp_path / "t")[0] == 1


def test_console_entry_point(nyt_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "semql.cli", "explain", "SELECT id FROM nyt_articles", "--tables", str(nyt_dir / "tables")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "Baseline plan" in proc.stdout
