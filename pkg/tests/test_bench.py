import csv
import io
import json
from pathlib import Path

import pytest

from semql import bench
from semql import scenarios as S
from semql.errors import ScenarioParseError

SCENARIOS = Path(__file__).resolve().parent.parent / "benchmarks" / "scenarios"


def rows_of(cells):
    return list(csv.DictReader(io.StringIO(bench.cells_csv(cells))))


def test_csv_columns_stable():
    cells = bench.run_scenario(bench.validate_scenario({"generator": "reorder", "sweep": {"param": "in_selectivity", "values": [0.5]}, "strategies": ["ai_first"], "options": {"n_rows": 100}}))
    header = bench.cells_csv(cells).splitlines()[0]
    assert header == ",".join(bench.CSV_COLUMNS)
    assert all(r["seed"] == "0" for r in rows_of(cells))


@pytest.mark.parametrize("sel", [0.1, 0.2, 0.5, 1.0])
def test_reorder_speedup_matches_closed_form(sel):
    doc = bench.validate_scenario(
        {"generator": "reorder", "sweep": {"param": "in_selectivity", "values": [sel]}, "strategies": ["ai_first", "reordered"], "options": {"n_rows": 1000}}
    )
    cells = {c.strategy: c for c in bench.run_scenario(doc)}
    # AI first evaluates every row; cheap first evaluates only the IN survivors
    assert cells["ai_first"].ai_calls == 1000
    assert cells["reordered"].ai_calls == round(1000 * sel)
    assert cells["ai_first"].f1 == cells["reordered"].f1 == 1.0


def test_placement_sweep_ai_aware_is_min():
    cells = bench.run_scenario(bench.load_scenario(SCENARIOS / "placement.json"))
    by = {(c.value, c.strategy): c.ai_calls for c in cells}
    for ratio in (0.1, 0.5, 1.0, 1.5, 2.0):
        assert by[(ratio, "ai_aware")] == min(by[(ratio, "pullup")], by[(ratio, "pushdown")])


def test_speedup_table():
    cells = bench.run_scenario(bench.load_scenario(SCENARIOS / "rewrite.json"))
    table = list(csv.reader(io.StringIO(bench.speedup_table(cells))))
    assert table[0][-1] == "speedup_vs_cross_join"
    speeds = {(r[0], r[2]): r[4] for r in table[1:]}
    assert speeds[("50", "cross_join")] == "1.000"
    assert speeds[("50", "rewrite")] == "100.000"
    assert bench.speedup_table([]) == ""


def test_cascade_budget_zero_row_is_proxy_only():
    doc = bench.validate_scenario(
        {"generator": "cascade", "sweep": {"param": "positive_rate", "values": [0.5]}, "strategies": ["proxy_only", "cascade"],
         "options": {"n_rows": 400, "oracle_budget": 0}}
    )
    proxy, casc = bench.run_scenario(doc)
    assert proxy.oracle_calls == casc.oracle_calls == 0
    assert (proxy.ai_calls, proxy.f1) == (casc.ai_calls, casc.f1)


def test_file_scenario(tmp_path):
    sc = S.nyt_reorder(0.3, n_rows=200)
    S.export_scenario(sc, tmp_path)
    query = sc.sql.replace("id_group IN (0, 1, 2)", "id_group IN (${value})")
    assert query != sc.sql
    doc = {
        "tables": "tables",
        "providers": "providers.json",
        "query": query,
        "sweep": {"param": "groups", "values": ["0", "0, 1, 2"]},
        "strategies": ["ai_first", "reordered"],
        "truth": {"column": "id", "values": sorted(sc.truth[1])},
    }
    (tmp_path / "s.json").write_text(json.dumps(doc))
    cells = bench.run_scenario(bench.load_scenario(tmp_path / "s.json"))
    by = {(c.value, c.strategy): c for c in cells}
    assert by[("0", "reordered")].ai_calls == 20
    assert by[("0, 1, 2", "reordered")].ai_calls == 60
    assert by[("0, 1, 2", "reordered")].f1 == 1.0


@pytest.mark.parametrize(
    "doc",
    [
        [],
        {"sweep": {"param": "x", "values": [1]}, "strategies": ["ai_first"]},
        {"generator": "reorder", "sweep": {"param": "x", "values": []}, "strategies": ["ai_first"]},
        {"generator": "reorder", "sweep": {"param": "x", "values": [1]}, "strategies": []},
        {"generator": "reorder", "sweep": {"param": "x", "values": [1]}, "strategies": ["warp"]},
        {"generator": "nope", "sweep": {"param": "x", "values": [1]}, "strategies": ["ai_first"]},
        {"generator": "reorder", "sweep": {"param": "x", "values": [1]}, "strategies": ["ai_first"], "seeds": "0"},
    ],
)
def test_scenario_validation(doc):
    with pytest.raises(ScenarioParseError):
        bench.validate_scenario(doc)


def test_unreadable_scenario(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ScenarioParseError):
        bench.load_scenario(tmp_path / "bad.json")
    with pytest.raises(ScenarioParseError):
        bench.load_scenario(tmp_path / "missing.json")


def test_bad_sweep_value():
    doc = bench.validate_scenario({"generator": "reorder", "sweep": {"param": "in_selectivity", "values": ["lots"]}, "strategies": ["ai_first"]})
    with pytest.raises(ScenarioParseError):
        bench.run_scenario(doc)


def test_cli_bench_writes_files(tmp_path, capsys):
    from semql.cli import main

    out = tmp_path / "r.csv"
    assert main(["bench", str(SCENARIOS / "reorder.json"), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == ",".join(bench.CSV_COLUMNS)
    assert out.with_suffix(".speedup.csv").exists()
    (tmp_path / "bad.json").write_text("[]")
    assert main(["bench", str(tmp_path / "bad.json")]) == 2


def test_shipped_scenarios_validate():
    for path in sorted(SCENARIOS.glob("*.json")):
        bench.load_scenario(path)
