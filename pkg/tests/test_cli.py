import json
import shutil
from pathlib import Path

import pytest

from doboc import cli
from doboc.simulator import read_trace_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, obj, name="c.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def fixture_a(**over):
    d = json.loads((CONFIGS / "fixture_a.json").read_text())
    d.update(over)
    return d


def test_run_fixture_a(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert cli.main(["run", "--config", str(write(tmp_path, fixture_a())), "--out", str(out)]) == 0
    rows = read_trace_csv(out)
    assert rows[-1]["f_gap"] <= 1e-12
    assert "rounds=1" in capsys.readouterr().out


def test_run_echoes_auto_eta(tmp_path, capsys):
    path = write(tmp_path, fixture_a(eta="auto-thm1"))
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "t.csv")]) == 0
    assert "eta=0.5" in capsys.readouterr().out


def test_run_missing_K(tmp_path, capsys):
    path = write(tmp_path, fixture_a(algorithm="doboc-k"))
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "t.csv")]) == 1
    assert "'K'" in capsys.readouterr().err


def test_run_budget_exhausted(tmp_path):
    path = write(tmp_path, fixture_a(algorithm="dgd", eta=0.1, max_iter=3))
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "t.csv")]) == 2
    assert len(read_trace_csv(tmp_path / "t.csv")) == 4


def test_run_blow_up(tmp_path, capsys):
    path = write(tmp_path, fixture_a(algorithm="doboc-k", K=2, eta=40.0, max_iter=5000))
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "t.csv")]) == 1
    assert "iteration" in capsys.readouterr().err


def test_run_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"graph": }')
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "t.csv")]) == 1
    assert "line 1 column" in capsys.readouterr().err


def test_run_logistic_config(tmp_path):
    for name in ("star_logistic.json", "star_logistic.csv"):
        shutil.copy(CONFIGS / name, tmp_path / name)
    assert cli.main(["run", "--config", str(tmp_path / "star_logistic.json"), "--out", str(tmp_path / "t.csv")]) == 0


def test_bounds_fixture_a(tmp_path, capsys):
    assert cli.main(["bounds", "--config", str(write(tmp_path, fixture_a()))]) == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["a"] == 2.0 and payload["eta_thm1_max"] == 1.0 and payload["c"] == 0.5
    assert {"m", "M", "L", "w_min", "eta_thm2_max", "epsilon", "preconditions"} <= payload.keys()


def test_bounds_single_agent(tmp_path, capsys):
    obj = {
        "graph": {"type": "metropolis", "n": 1, "edges": []},
        "problem": {"type": "quadratic", "spec": {"A": [[[1.0]]], "b": [[0.0]]}},
        "lambda": 3.0, "algorithm": "doboc", "eta": 0.5,
    }
    assert cli.main(["bounds", "--config", str(write(tmp_path, obj))]) == 0
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["a"] == 1.0


def test_bounds_notes_dgd_equivalence(tmp_path, capsys):
    path = write(tmp_path, fixture_a(algorithm="doboc-k", K=1, eta=1.0))
    assert cli.main(["bounds", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "coincides with DGD" in out
    assert json.loads(out.strip().splitlines()[-1])["preconditions"]["dgd_equivalent"] is True


def test_verify_tiny(capsys):
    assert cli.main(["verify", "--scale", "tiny"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_verify_detects_injected_bug(capsys):
    assert cli.main(["verify", "--scale", "tiny", "--inject-bug"]) == 3
    out = capsys.readouterr().out
    report = json.loads(out.strip().splitlines()[-1])
    assert report["check"] == "oracle_equivalence"
    assert {"fixture", "seed", "point"} <= report["counterexample"].keys()


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("DOBOC_THREADS", "zero")
    assert cli.main(["verify", "--scale", "tiny"]) == 1


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["plot"])
