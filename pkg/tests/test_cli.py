import csv
import itertools
import json

import pytest

from vrvo.cli import EXIT_USAGE, exit_code, exit_code_for, main
from vrvo.geom2d import Vec2
from vrvo.sim import RunMetrics, builtin_scenarios, circle
from vrvo.traceio import (
    ScenarioFormatError,
    load_scenario,
    read_trace_jsonl,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from vrvo.audit import audit_trace, teleport


@pytest.mark.parametrize("collided,incomplete,deadlocked", list(itertools.product([False, True], repeat=3)))
def test_exit_code_mapping(collided, incomplete, deadlocked):
    expected = 2 if collided else (3 if incomplete or deadlocked else 0)
    assert exit_code(collided, incomplete, deadlocked) == expected
    m = RunMetrics(n_agents=4, arrived_count=3 if incomplete else 4,
                   collision_count=5 if collided else 0, deadlocked_at_end=1 if deadlocked else 0)
    assert exit_code_for(m) == expected


@pytest.mark.parametrize("sc", builtin_scenarios(), ids=lambda s: s.name)
def test_scenario_round_trip(sc, tmp_path):
    path = tmp_path / "sc.json"
    save_scenario(sc, path)
    assert load_scenario(path) == sc


def test_unknown_keys_are_rejected():
    base = scenario_to_dict(circle(4))
    for mutate in (
        lambda d: d.update(colour="red"),
        lambda d: d["agents"][0].update(speed=3),
        lambda d: d["config"].update(sigmaa=2.0),
        lambda d: d["limits"].update(jerk=1.0),
    ):
        d = json.loads(json.dumps(base))
        mutate(d)
        with pytest.raises(ScenarioFormatError):
            scenario_from_dict(d)


def test_wrong_version_is_rejected():
    d = scenario_to_dict(circle(4))
    d["version"] = 99
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict(d)


def test_invalid_values_are_rejected():
    d = scenario_to_dict(circle(4))
    d["limits"]["dt"] = -1.0
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict(d)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_run_audit_and_teleport(tmp_path, capsys):
    trace = tmp_path / "c4.jsonl"
    code, out = run_cli(capsys, "run", "--scenario", "circle", "--agents", "4", "--trace", str(trace))
    assert code == 0
    summary = json.loads(out)
    assert summary["collision_count"] == 0 and summary["exit"] == 0
    assert json.loads((tmp_path / "c4.metrics.json").read_text())["arrived_count"] == 4

    code, out = run_cli(capsys, "audit", str(trace))
    assert code == 0 and json.loads(out)["ok"]

    sc, records = read_trace_jsonl(trace)
    bad = teleport(records, 12, 1, Vec2(0.0, 0.0))
    rep = audit_trace(sc, bad)
    assert rep.containment_violations and rep.containment_violations[0][:2] == (12, 1)
    lines = trace.read_text().splitlines()
    with open(tmp_path / "bad.jsonl", "w") as fh:
        fh.write(lines[0] + "\n")
        for ln in lines[1:]:
            d = json.loads(ln)
            if d["tick"] == 12 and d["id"] == 1:
                d["p"] = [0.0, 0.0]
            fh.write(json.dumps(d) + "\n")
    code, out = run_cli(capsys, "audit", str(tmp_path / "bad.jsonl"), "--verbose", "3")
    report = json.loads(out)
    assert code == 1
    assert report["first_containment_violation"][:2] == [12, 1]


def test_csv_trace(tmp_path, capsys):
    path = tmp_path / "t.csv"
    code, _ = run_cli(capsys, "run", "--scenario", "two_vs_one", "--trace", str(path), "--format", "csv")
    assert code == 0
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tick", "id", "px", "py", "vx", "vy", "ux", "uy", "mode", "flags"]
    assert rows[1][:2] == ["0", "0"]


def test_overrides_reach_the_scenario(tmp_path, capsys):
    code, out = run_cli(capsys, "run", "--scenario", "circle4", "--model", "di", "--v-max", "1.0",
                        "--tau", "none", "--eps-p", "0.1", "--max-ticks", "5")
    assert code == 3
    assert json.loads(out)["ticks"] == 5


def test_usage_errors(tmp_path, capsys):
    assert main(["run"]) == EXIT_USAGE
    assert main(["run", "--scenario", "circle4", "--scenario-file", "x.json"]) == EXIT_USAGE
    assert main(["run", "--scenario", "nowhere"]) == EXIT_USAGE
    assert main(["run", "--scenario", "circle4", "--sigma", "-1"]) == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1, "agents": [], "extra": 1}')
    assert main(["run", "--scenario-file", str(bad)]) == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(["run", "--scenario", "circle4", "--deadlock", "maybe"])
    capsys.readouterr()


def test_scenarios_list_and_export(tmp_path, capsys):
    code, out = run_cli(capsys, "scenarios")
    assert code == 0 and "grid16" in out and "pairs4" in out
    path = tmp_path / "g.json"
    code, _ = run_cli(capsys, "scenarios", "--export", "grid16", str(path))
    assert code == 0
    code, out = run_cli(capsys, "run", "--scenario-file", str(path), "--max-ticks", "3")
    assert json.loads(out)["scenario"] == "grid16"


def test_bench_rows(tmp_path, capsys):
    path = tmp_path / "bench.json"
    code, out = run_cli(capsys, "bench", "--sizes", "5", "10", "--ticks", "5", "--method", "both", "--json", str(path))
    assert code == 0
    rows = json.loads(path.read_text())
    assert {(r["method"], r["agents"]) for r in rows} == {("vrvo", 5), ("vrvo", 10), ("orca", 5), ("orca", 10)}
    assert "vrvo/orca" in out


@pytest.mark.slow
def test_documented_exit_codes(capsys):
    assert run_cli(capsys, "run", "--scenario", "circle", "--agents", "25", "--model", "di", "--method", "vrvo")[0] == 0
    assert run_cli(capsys, "run", "--scenario", "circle", "--agents", "70", "--model", "di", "--method", "orca")[0] == 2
    assert run_cli(capsys, "run", "--scenario", "grid16", "--deadlock", "off")[0] == 3
