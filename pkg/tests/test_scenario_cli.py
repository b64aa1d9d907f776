import csv
import io
import json
from pathlib import Path

import pytest

from exante_match import cli, golden
from exante_match.golden import GoldenResult
from exante_match.scenario import (
    ScenarioError,
    ScenarioValidationError,
    dump_scenario,
    load_scenario,
    same_instance,
    scenario_from_dict,
    scenario_to_dict,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def _doc(name):
    return json.loads((FIXTURES / f"{name}.json").read_text())


def _write(tmp_path, doc, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _csv_tables(text):
    return [list(csv.reader(io.StringIO(block))) for block in text.strip().split("\n\n")]


# scenario files

@pytest.mark.parametrize("name", ["ex_a", "ex_b", "ex_c"])
def test_fixture_round_trip(tmp_path, name):
    first = load_scenario(FIXTURES / f"{name}.json")
    dump_scenario(first, tmp_path / "again.json")
    second = load_scenario(tmp_path / "again.json")
    assert same_instance(first.instance, second.instance)
    assert first.signals.keys() == second.signals.keys()
    for key in first.signals:
        assert all(a.equals(b, 0.0) for a, b in zip(first.signal(key), second.signal(key)))
    assert second.config == first.config


def test_partial_rankings_are_completed_and_recorded():
    sc = load_scenario(FIXTURES / "ex_a.json")
    assert sc.instance.completions and all(c.startswith("s2") for c in sc.instance.completions)
    assert scenario_to_dict(sc)["rankings"]["s2"]["w1"] == ["p2", "p1", "p3", "p4"]


def test_builtin_and_fixture_files_agree():
    for name in ("ex_a", "ex_b", "ex_c"):
        assert same_instance(golden.builtin_scenario(name).instance, load_scenario(FIXTURES / f"{name}.json").instance)


def test_field_level_errors_are_collected():
    doc = _doc("ex_b")
    doc["capacities"]["p1"] = "one"
    doc["priorities"]["p2"] = ["s1", "s9"]
    doc["rankings"]["s1"]["w2"] = ["p2", "p7"]
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(doc)
    problems = " | ".join(info.value.problems)
    for path in ("capacities.p1", "priorities.p2[1]", "rankings.s1.w2[1]"):
        assert path in problems


def test_schema_and_shape_errors():
    doc = _doc("ex_b")
    doc["schema"] = "other/0"
    with pytest.raises(ScenarioError, match="schema"):
        scenario_from_dict(doc)
    with pytest.raises(ScenarioError):
        scenario_from_dict([])
    doc = _doc("ex_b")
    doc["utility_matrix"] = {}
    with pytest.raises(ScenarioError, match="exactly one"):
        scenario_from_dict(doc)


def test_invalid_market_reported_as_validation_error():
    doc = _doc("ex_b")
    doc["prior"] = {"w1": 0.5, "w2": 0.6}
    with pytest.raises(ScenarioValidationError):
        scenario_from_dict(doc)


def test_bad_signal_reported():
    doc = _doc("ex_a")
    doc["signals"]["partition"]["cells"] = [["w1"], ["w2"]]
    with pytest.raises(ScenarioError, match="signals.partition"):
        scenario_from_dict(doc)


def test_json_syntax_error_has_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema": "exante-match/1",\n  "students": [\n}')
    with pytest.raises(ScenarioError, match=r"line 4, column 1"):
        load_scenario(path)
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")


def test_unknown_signal_name():
    with pytest.raises(ScenarioError, match="no signal named"):
        load_scenario(FIXTURES / "ex_b.json").signal("partial")


# command line

def test_solve_table_output(capsys):
    code, out, _ = _run(capsys, "solve", str(FIXTURES / "ex_a.json"), "--signal", "full")
    assert code == 0
    assert "greatest cutoff: (2, 4, 1.7, 1)" in out
    assert "completed rankings: s2" in out


def test_solve_csv_columns(capsys):
    code, out, _ = _run(capsys, "solve", str(FIXTURES / "ex_a.json"), "--signal", "full", "--format", "csv")
    assert code == 0
    programs, trace = _csv_tables(out)
    assert programs[0] == ["point", "program", "demand", "capacity", "cutoff"]
    greatest = {row[1]: float(row[4]) for row in programs[1:] if row[0] == "greatest"}
    assert greatest == pytest.approx({"p1": 2.0, "p2": 4.0, "p3": 1.7, "p4": 1.0}, abs=1e-9)
    assert trace[0] == ["sweep", "p1", "p2", "p3", "p4"]


def test_demand_csv_full_precision(capsys):
    code, out, _ = _run(capsys, "demand", str(FIXTURES / "ex_b.json"), "--cutoff", "1,2", "--format", "csv")
    assert code == 0
    (table,) = _csv_tables(out)
    assert table[0] == ["program", "demand", "capacity", "cutoff"]
    assert [float(r[1]) for r in table[1:]] == [0.5, 1.5]


def test_demand_requires_cutoff(capsys):
    code, _, err = _run(capsys, "demand", str(FIXTURES / "ex_a.json"))
    assert code == 2 and "--cutoff" in err


def test_scenario_cutoff_used_by_default(capsys):
    code, out, _ = _run(capsys, "demand", str(FIXTURES / "ex_c.json"), "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert [row["cutoff"] for row in doc["programs"]] == [1.75, 2.0]


def test_welfare_json(capsys):
    code, out, _ = _run(capsys, "welfare", str(FIXTURES / "ex_a.json"), "--signal", "partition", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["cutoff source"] == "greatest clearing"
    s1 = doc["students"][0]
    assert s1["student"] == "s1" and s1["EU"] == pytest.approx(3.7, abs=1e-12)
    assert list(s1) == ["student", "rank-1", "rank-2", "rank-3", "rank-4", "unmatched", "EU"]


def test_compare_summary(capsys):
    code, out, _ = _run(capsys, "compare", str(FIXTURES / "ex_a.json"), "--left", "full", "--right", "partition")
    assert code == 0
    assert "summary: left more informative: yes; left Pareto dominated by right" in out


def test_compare_needs_both_sides(capsys):
    code, _, err = _run(capsys, "compare", str(FIXTURES / "ex_a.json"), "--left", "full")
    assert code == 2 and "--left and --right" in err


def test_simulate_is_reproducible(capsys):
    argv = ["simulate", str(FIXTURES / "ex_b.json"), "--cutoff", "1.5,2", "--draws", "20000", "--seed", "3",
            "--format", "csv"]
    code, first, _ = _run(capsys, *argv)
    assert code == 0
    _, second, _ = _run(capsys, *argv)
    assert first == second
    programs, students = _csv_tables(first)
    assert programs[0] == ["program", "demand", "capacity", "cutoff", "std error", "over capacity"]
    assert students[0] == ["student", "EU", "std error"]


def test_verify_passes_on_fixtures(capsys):
    for name in ("ex_a", "ex_c"):
        code, out, _ = _run(capsys, "verify", str(FIXTURES / f"{name}.json"))
        assert code == 0 and "FAIL" not in out


def test_tie_exit_code(capsys):
    code, _, err = _run(capsys, "solve", str(FIXTURES / "ex_b.json"), "--signal", "null")
    assert code == 4 and "error" in err
    code, _, _ = _run(capsys, "solve", str(FIXTURES / "ex_b.json"), "--signal", "null", "--tie-break", "index")
    assert code == 0


def test_non_convergence_exit_code(capsys, tmp_path):
    doc = _doc("ex_a")
    doc["config"]["max_sweeps"] = 1
    code, _, err = _run(capsys, "solve", _write(tmp_path, doc), "--signal", "full")
    assert code == 3 and "last iterate" in err


def test_invalid_input_exit_codes(capsys, tmp_path):
    doc = _doc("ex_b")
    doc["capacities"]["p1"] = -1
    code, _, err = _run(capsys, "solve", _write(tmp_path, doc))
    assert code == 2 and err.startswith("error:")
    code, _, _ = _run(capsys, "demand", str(FIXTURES / "ex_b.json"), "--cutoff", "1,x")
    assert code == 2
    code, _, _ = _run(capsys, "demand", str(FIXTURES / "ex_b.json"), "--cutoff", "1,2,3")
    assert code == 2
    code, _, _ = _run(capsys, "solve", str(FIXTURES / "ex_b.json"), "--signal", "nope")
    assert code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["solve"])
    assert info.value.code == 2


def test_golden_command(capsys):
    code, out, _ = _run(capsys, "paper", "--format", "csv")
    assert code == 0
    (table,) = _csv_tables(out)
    assert table[0] == ["check", "result", "detail"]
    assert len(table) > 10 and all(row[1] == "pass" for row in table[1:])


def test_failed_check_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(golden, "run_all", lambda: [GoldenResult("forced", False, "x")])
    code, out, _ = _run(capsys, "paper")
    assert code == 1 and "FAIL" in out


def test_table_format_alignment():
    out = cli.Output("table")
    out.table("t", ["name", "value"], [["a", 1.23456789], ["bbb", 10.0]])
    lines = out.render().splitlines()
    assert lines == ["[t]", "name    value", "a     1.23457", "bbb        10"]
