import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ancilla_ensemble.cli import main, parse_angle, parse_grid


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def comment(text, key):
    for ln in text.splitlines():
        if ln.startswith(f"# {key}: "):
            return json.loads(ln[len(key) + 4:])
    raise KeyError(key)


def test_parse_angle():
    assert parse_angle("pi") == np.pi
    assert parse_angle("-pi/4") == -np.pi / 4
    assert parse_angle("3*pi/4") == 3 * np.pi / 4
    assert parse_angle("2pi") == 2 * np.pi
    assert parse_angle("0.5") == 0.5
    with pytest.raises(ValueError):
        parse_angle("tau")
    assert np.allclose(parse_grid("0:pi:5"), np.linspace(0, np.pi, 5))
    assert np.allclose(parse_grid("1,2,pi"), [1, 2, np.pi])


def test_elgi(capsys):
    code, out, _ = run(["elgi", "--theta-grid", "0:pi:64"], capsys)
    assert code == 0
    rows = csv_rows(out)
    assert len(rows) == 64 and list(rows[0]) == ["theta", "D3_circuit", "D3_closed_form"]
    d = np.array([float(r["D3_circuit"]) for r in rows])
    theta = np.array([float(r["theta"]) for r in rows])
    assert abs(theta[np.argmin(d)] - np.pi / 4) < np.pi / 63
    assert abs(d.min() + 0.134) < 0.002
    assert comment(out, "config")["theta_grid"] == "0:pi:64"


def test_counts(capsys):
    code, out, _ = run(["counts", "--n-max", "5"], capsys)
    rows = csv_rows(out)
    got = [(int(r["M_QPT"]), int(r["M_AAPT"]), int(r["M_SSPT"])) for r in rows]
    assert got == [(8, 2, 1), (32, 4, 1), (192, 11, 1), (1024, 32, 1), (7168, 103, 1)]


def test_sspt_identity(capsys):
    code, out, _ = run(["sspt", "--process", "identity", "--noise", "0"], capsys)
    res = json.loads(out)["result"]
    assert code == 0
    assert abs(res["chi"][0][0][0] - 1) < 1e-9
    assert abs(res["fidelity"] - 1) < 1e-12


def test_inrm_and_moussa(capsys):
    code, out, _ = run(["inrm", "--theta", "pi/2"], capsys)
    tables = json.loads(out)["result"]["tables"]
    for t in tables.values():
        assert np.allclose(t["P"], 0.25)
    code, out, _ = run(["moussa", "--unitary", "[[0,1],[1,0]]", "--unitary", "[[0,[0,-1]],[[0,1],0]]",
                        "--state", "zero"], capsys)
    res = json.loads(out)["result"]
    assert code == 0 and np.allclose(res["value"], [0, -1]) and res["abs_difference"] < 1e-12


def test_moussa_circuit(capsys):
    circ = json.dumps([{"kind": "Hadamard", "targets": [0]}])
    code, out, _ = run(["moussa", "--circuit", circ, "--state", "plus"], capsys)
    assert code == 0 and np.allclose(json.loads(out)["result"]["value"], [1 / np.sqrt(2), 0])


def test_fcf_and_markers(capsys):
    code, out, _ = run(["fcf", "--b-grid", "0:0.5:3"], capsys)
    rows = csv_rows(out)
    assert len(rows) == 6
    for r in rows:
        assert abs(float(r["fcf_truncated"]) - float(r["fcf_analytic"])) < 0.01
    markers = comment(out, "summary")["forbidden_region_markers"]
    assert {(m["m"], m["n"]): m["b"] for m in markers} == {(0, 0): 2.0, (0, 1): 1 + np.sqrt(3)}


def test_contextuality(capsys):
    code, out, _ = run(["contextuality", "--levels", "2", "--beta-grid", "pi/4", "--eta-grid", "3*pi/4"], capsys)
    rows = csv_rows(out)
    assert len(rows) == 1 and abs(float(rows[0]["I"]) - 2 * np.sqrt(2)) < 1e-9


def test_aaqst(capsys):
    code, out, _ = run(["aaqst", "--n", "2", "--ancilla", "2", "--draws", "3"], capsys)
    res = json.loads(out)["result"]
    assert code == 0 and res["frobenius_error"] < 1e-8 and res["design_shape"] == [64, 15]


def test_noise_outputs(tmp_path, capsys):
    out = tmp_path / "decay.csv"
    code, _, _ = run(["noise", "--trajectories", "5", "--total-time", "20", "--out", str(out)], capsys)
    assert code == 0
    rows = csv_rows(out.read_text())
    assert float(rows[0]["Mx"]) == pytest.approx(1.0)
    meta = json.loads(out.with_suffix(".json").read_text())
    assert {"t2", "residual"} <= set(meta["summary"])


def test_config_merge_and_round_trip(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"theta-grid": "0:pi:5", "n": 4}))
    code, out, _ = run(["elgi", "--config", str(cfg), "--n", "3"], capsys)
    conf = comment(out, "config")
    assert conf["theta_grid"] == "0:pi:5" and conf["n"] == 3
    first = tmp_path / "a.csv"
    run(["elgi", "--config", str(cfg), "--out", str(first)], capsys)
    replay = tmp_path / "b.csv"
    run(["elgi", "--config", str(first.with_suffix(".json")), "--out", str(replay)], capsys)
    assert first.read_bytes() == replay.read_bytes()


def test_json_output_replays(tmp_path, capsys):
    a = tmp_path / "a.json"
    run(["aaqst", "--n", "1", "--ancilla", "1", "--seed", "4", "--out", str(a)], capsys)
    b = tmp_path / "b.json"
    run(["aaqst", "--config", str(a), "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["elgi", "--theta-grid", "0:7:4"],
    ["elgi", "--bogus"],
    ["nothing"],
    ["contextuality", "--levels", "5"],
    ["sspt", "--process", "swap"],
])
def test_validation_exit_code(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2
    assert json.loads(err)["error"]["exit_code"] == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gamma": 5, "colour": "red"}))
    code, _, err = run(["noise", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err
    cfg.write_text(json.dumps({"gamma": "fast"}))
    assert run(["noise", "--config", str(cfg)], capsys)[0] == 2


def test_bad_inputs_are_validation_errors(tmp_path, capsys):
    code, _, err = run(["aaqst", "--n", "1", "--ancilla", "0", "--draws", "0"], capsys)
    assert code == 2
    bad = tmp_path / "k.json"
    bad.write_text("[[[1, 0], [0, 1]], [[1, 0], [0, 1]]]")  # not trace preserving
    code, _, err = run(["sspt", "--process", str(bad)], capsys)
    assert code == 2


def test_numerical_failure_exit_code(monkeypatch, capsys):
    from ancilla_ensemble import tomography

    def no_plan(*args, **kwargs):
        raise tomography.PlanError("no usable plan")

    monkeypatch.setattr(tomography, "build_plan", no_plan)
    code, _, err = run(["aaqst", "--n", "1", "--ancilla", "1"], capsys)
    assert code == 3
    rec = json.loads(err)["error"]
    assert rec["type"] == "PlanError" and rec["exit_code"] == 3


def test_help_lists_units():
    out = subprocess.run([sys.executable, "-m", "ancilla_ensemble", "noise", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for unit in ("kicks/ms", "degrees", "ms", "Hz"):
        assert unit in out


def test_subprocess_determinism(tmp_path):
    cmd = [sys.executable, "-m", "ancilla_ensemble", "noise-spectrum", "--tau-list", "0.4,0.8",
           "--trajectories", "10", "--total-time", "30", "--seed", "3"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and len(a) > 0
