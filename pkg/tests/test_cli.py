import json
import subprocess
import sys
from pathlib import Path

import pytest

from laminar_persuasion import ProblemFormatError, instances
from laminar_persuasion.cli import canonical_json, main, parse_problem, problem_to_dict

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def threshold_file(tmp_path):
    return write(tmp_path, "threshold.json", problem_to_dict(instances.threshold()))


@pytest.fixture
def buyer_file(tmp_path):
    return write(tmp_path, "buyer.json", problem_to_dict(instances.buyer()))


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_canonical_json():
    assert canonical_json({"b": 0.1, "a": [1, float("nan"), True]}) == '{"a":[1,null,true],"b":0.10000000000000001}\n'


def test_problem_roundtrip():
    pb = instances.buyer()
    again, cfg = parse_problem(json.loads(json.dumps(problem_to_dict(pb))))
    assert again.type_labels == pb.type_labels and again.action_labels == pb.action_labels
    assert (again.u2 == pb.u2).all() and again.distribution == pb.distribution


def test_solve(threshold_file, capsys, monkeypatch):
    monkeypatch.delenv("LAMINAR_PERSUASION_OUT", raising=False)
    code, out, _ = run(["solve", threshold_file], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["objective"] == pytest.approx(0.5)
    assert data["ic_matrix"] == [[0.0]]
    assert [a["action"] for a in data["atoms"][0]] == ["reject", "accept"]
    assert {"binding_groups", "diagnostics", "mode"} <= set(data)


def test_single_type_public_matches(threshold_file, capsys, monkeypatch):
    monkeypatch.delenv("LAMINAR_PERSUASION_OUT", raising=False)
    _, a, _ = run(["solve", threshold_file], capsys)
    _, b, _ = run(["solve", threshold_file, "--public"], capsys)
    assert json.loads(a)["objective"] == pytest.approx(json.loads(b)["objective"], abs=1e-12)


def test_deterministic_bytes(buyer_file, tmp_path, capsys):
    run(["solve", buyer_file, "--out", str(tmp_path / "a")], capsys)
    run(["solve", buyer_file, "--out", str(tmp_path / "b")], capsys)
    assert (tmp_path / "a" / "solution.json").read_bytes() == (tmp_path / "b" / "solution.json").read_bytes()


def test_partition_verify_roundtrip(buyer_file, tmp_path, capsys):
    out = tmp_path / "out"
    code, _, _ = run(["partition", buyer_file, "--out", str(out)], capsys)
    assert code == 0
    assert (out / "mechanism.csv").read_text().startswith("type,message,interval_lo,interval_hi\n")
    for mech in ("mechanism.csv", "mechanism.json"):
        code, _, _ = run(["verify", buyer_file, "--mechanism", str(out / mech), "--mc", "20000",
                          "--seed", "3", "--out", str(out)], capsys)
        assert code == 0
        rep = json.loads((out / "verify.json").read_text())
        assert rep["passed"] and rep["audit"]["passed"] and rep["monte_carlo"]["passed"]


def test_verify_fails_on_tampered_mechanism(buyer_file, tmp_path, capsys):
    out = tmp_path / "out"
    run(["partition", buyer_file, "--out", str(out)], capsys)
    lines = (out / "mechanism.csv").read_text().splitlines()
    t, m, lo, hi = lines[1].split(",")
    lines[1] = ",".join([t, m, lo, repr(float(hi) - 0.01)])
    lines.insert(2, ",".join([t, m, repr(float(hi) - 0.01), hi]))
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines[:2] + [lines[3]] + lines[4:]) + "\n")
    code, _, _ = run(["verify", buyer_file, "--mechanism", str(bad), "--out", str(out)], capsys)
    assert code == 3


def test_oracle(threshold_file, capsys, monkeypatch):
    monkeypatch.delenv("LAMINAR_PERSUASION_OUT", raising=False)
    code, out, _ = run(["oracle", threshold_file, "--bins", "2000"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["objective"] == pytest.approx(0.5, abs=1e-3)
    assert abs(data["gap"]) <= 1e-3


def test_oracle_against_solution_file(threshold_file, tmp_path, capsys):
    run(["solve", threshold_file, "--out", str(tmp_path)], capsys)
    code, _, _ = run(["oracle", threshold_file, "--bins", "50", "--solution", str(tmp_path / "solution.json"),
                      "--out", str(tmp_path)], capsys)
    assert code == 0
    data = json.loads((tmp_path / "oracle.json").read_text())
    assert data["reference_source"].endswith("solution.json")


def test_env_out_dir(threshold_file, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LAMINAR_PERSUASION_OUT", str(tmp_path / "env"))
    code, out, _ = run(["solve", threshold_file], capsys)
    assert code == 0 and (tmp_path / "env" / "solution.json").exists()


def test_demo_public_private(capsys, monkeypatch):
    monkeypatch.delenv("LAMINAR_PERSUASION_OUT", raising=False)
    code, out, _ = run(["demo", "public_private", "--n", "2"], capsys)
    assert code == 0
    assert "public optimum" in out and "FAIL" not in out


def test_exit_codes(tmp_path, capsys):
    base = problem_to_dict(instances.buyer())
    assert run([], capsys)[0] == 1
    assert run(["solve", str(tmp_path / "missing.json")], capsys)[0] == 1
    broken = tmp_path / "broken.json"
    broken.write_text('{"version": 1,\n  "types": [}')
    code, _, err = run(["solve", str(broken)], capsys)
    assert code == 1 and "line 2" in err
    bad = dict(base, u1=[row[:-1] for row in base["u1"]])
    code, _, err = run(["solve", write(tmp_path, "bad.json", bad)], capsys)
    assert code == 1 and json.loads(err)["field"] == "u1[0]"
    infeasible = dict(base, participation=[None, None, 99.0])
    code, _, err = run(["solve", write(tmp_path, "inf.json", infeasible)], capsys)
    assert code == 2
    msg = json.loads(err)
    assert msg["constraint"] == "participation" and msg["type"] == "theta=0.6"


@pytest.mark.parametrize("patch,field", [
    ({"version": 2}, "version"),
    ({"distribution": {"kind": "normal"}}, "distribution"),
    ({"types": [{"label": "a", "weight": -1}]}, "types[0].weight"),
    ({"v2": [[0, "x"]]}, "v2[0][1]"),
    ({"solver": {"grid": "many"}}, "solver"),
    ({"participation": [1, 2]}, "participation"),
])
def test_parse_errors_name_field(patch, field):
    base = problem_to_dict(instances.threshold())
    with pytest.raises(ProblemFormatError) as e:
        parse_problem({**base, **patch})
    assert e.value.field == field


def test_weights_renormalized_with_warning(caplog):
    base = problem_to_dict(instances.buyer())
    base["types"] = [{"label": t["label"], "weight": 1.0} for t in base["types"]]
    with caplog.at_level("WARNING"):
        pb, _ = parse_problem(base)
    assert pb.weights.sum() == pytest.approx(1.0)
    assert "renormalizing" in caplog.text


def test_shipped_problem_files():
    for path in PROBLEMS.glob("*.json"):
        parse_problem(json.loads(path.read_text()))


def test_module_entry_point(threshold_file):
    out = subprocess.run([sys.executable, "-m", "laminar_persuasion", "solve", threshold_file],
                         capture_output=True, text=True, env={"PATH": "/usr/bin:/bin"})
    assert out.returncode == 0, out.stderr
    assert json.loads(out.stdout)["objective"] == pytest.approx(0.5)


def test_help_lists_commands(capsys):
    code, out, _ = run(["--help"], capsys)
    assert code == 0
    for cmd in ("solve", "partition", "verify", "oracle", "demo"):
        assert cmd in out
