import json
import subprocess
import sys

import pytest

from batchbackoff import cli, verify
from batchbackoff.engine import read_trace


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_beb(capsys):
    code, out, _ = _run(capsys, "run", "--policy", "beb", "--n", "150", "--seed", "7",
                        "--payload", "64")
    assert code == 0
    d = json.loads(out)
    assert 100 <= d["stats"]["cw_slots"] < 10_000
    assert d["config"]["seed"] == 7
    c = d["cost"]
    parts = ("transmission_time_us", "ack_timeout_time_us", "cw_slot_time_us",
             "success_overhead_us", "estimation_time_us")
    assert abs(sum(c[k] for k in parts) - c["total_us"]) < 0.05


def test_run_fixed_single_station_prints_seed(capsys):
    code, out, err = _run(capsys, "run", "--policy", "fixed:4", "--n", "1")
    assert code == 0
    d = json.loads(out)
    assert d["stats"]["cw_slots"] <= 4 and d["stats"]["disjoint_collisions"] == 0
    assert err.startswith("seed: ")
    assert int(err.split()[1]) == d["config"]["seed"]


def test_run_window_engine_dcf(capsys):
    code, out, _ = _run(capsys, "run", "--policy", "bestof:5", "--n", "50", "--seed", "1",
                        "--mode", "dcf", "--engine", "window")
    d = json.loads(out)
    assert code == 0 and d["config"]["policy"]["window_cap"] == 1024
    assert d["cost"]["estimation_time_us"] > 0


@pytest.mark.parametrize("argv", [
    ["run", "--policy", "nope", "--n", "3"],
    ["run", "--policy", "beb"],
    ["verify", "no-such-suite"],
    [],
])
def test_argument_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_parameter_errors_exit_2(capsys):
    code, _, err = _run(capsys, "run", "--policy", "beb", "--n", "0", "--seed", "1")
    assert code == 2 and "usage" in err and "n must be" in err
    code, _, err = _run(capsys, "run", "--policy", "beb", "--n", "3", "--payload", "4",
                        "--seed", "1")
    assert code == 2


def test_sweep_from_config_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"n_values": [5, 10], "policies": ["beb", "stb"], "trials": 3,
                               "seed": 5, "metrics": ["cw_slots"]}))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    code, out, _ = _run(capsys, "sweep", "--config", str(cfg), "--trials", "4",
                        "--out", str(out1), "--workers", "1")
    assert code == 0 and len(out.split()) == 3
    code, _, _ = _run(capsys, "sweep", "--config", str(cfg), "--trials", "4",
                      "--out", str(out2), "--workers", "2")
    for name in ("sweep.csv", "sweep_samples.csv", "sweep.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    manifest = json.loads((out1 / "sweep.json").read_text())
    assert manifest["spec"]["trials"] == 4 and manifest["spec"]["seed"] == 5


def test_sweep_from_flags_only(tmp_path, capsys):
    code, _, _ = _run(capsys, "sweep", "--n-values", "4:8:4", "--policies", "lb,llb",
                      "--trials", "2", "--seed", "1", "--out", str(tmp_path), "--name", "x",
                      "--metrics", "cw_slots,total_time_us", "--payload", "1024")
    assert code == 0
    rows = (tmp_path / "x.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 2 * 2


@pytest.mark.parametrize("content", ["not json", json.dumps([1, 2]),
                                     json.dumps({"n_values": [3], "policies": ["beb"],
                                                 "colour": 1}),
                                     json.dumps({"policies": ["beb"]})])
def test_sweep_bad_config_exit_2(tmp_path, capsys, content):
    cfg = tmp_path / "c.json"
    cfg.write_text(content)
    code, _, err = _run(capsys, "sweep", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 2 and "error" in err


def test_export_trace(tmp_path, capsys):
    path = tmp_path / "t" / "trace.ndjson"
    code, _, _ = _run(capsys, "export-trace", "--policy", "stb", "--n", "20", "--seed", "3",
                      "--out", str(path))
    assert code == 0
    with open(path) as fp:
        trace = read_trace(fp)
    assert trace.n == 20


def _fake_suite(passed):
    def suite(seed, workers=1):
        return verify.SuiteRun("fake", [verify.Check("0", "always", passed, f"seed {seed}")], {})
    return suite


@pytest.mark.parametrize("passed, code", [(True, 0), (False, 1)])
def test_verify_exit_code_tracks_checks(monkeypatch, tmp_path, capsys, passed, code):
    monkeypatch.setitem(verify.SUITES, "fake", _fake_suite(passed))
    got, out, _ = _run(capsys, "verify", "fake", "--seed", "4", "--out", str(tmp_path))
    assert got == code
    assert ("[PASS]" if passed else "[FAIL]") in out
    assert (tmp_path / "fake_checks.csv").exists()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "batchbackoff", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0
    for sub in ("run", "sweep", "verify", "export-trace"):
        assert sub in r.stdout
