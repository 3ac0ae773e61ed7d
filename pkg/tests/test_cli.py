import json
import subprocess
import sys

import numpy as np
import pytest

from tetratomo.bloch import outcome_probabilities
from tetratomo.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_probabilities(capsys):
    code, out, _ = run(capsys, "probabilities", "--state", "0", "0", "1")
    assert code == 0
    assert np.allclose(json.loads(out)["probabilities"], outcome_probabilities([0, 0, 1]))
    code, out, _ = run(capsys, "probabilities", "--state", "0", "0", "1", "--six", "--format", "csv")
    assert out.splitlines()[0] == "outcome,probability" and len(out.splitlines()) == 7


def test_estimate_and_exit_codes(capsys):
    code, out, _ = run(capsys, "estimate", "--counts", "10", "0", "0", "0")
    d = json.loads(out)
    assert code == 0 and d["branch"] == "boundary" and d["mu"] == pytest.approx(2.0)
    code, _, err = run(capsys, "estimate", "--counts", "0", "0", "0", "0")
    assert code == 2 and "error" in err
    code, _, _ = run(capsys, "estimate", "--counts", "1", "2", "3")
    assert code == 2
    code, _, _ = run(capsys, "probabilities", "--state", "1", "1", "1")
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["estimate"])
    assert exc.value.code == 2


def test_numerical_failure_exit_code(capsys, monkeypatch):
    from tetratomo import cli
    from tetratomo.errors import NoRoot

    def boom(*a, **k):
        raise NoRoot("no sign change")

    monkeypatch.setattr(cli, "ml_estimate_four", boom)
    code, _, err = run(capsys, "estimate", "--counts", "5", "1", "1", "1")
    assert code == 3 and "numerical" in err


def test_simulate_is_reproducible(capsys, tmp_path):
    out_file = tmp_path / "sim.csv"
    args = ("simulate", "--N", "50", "--trials", "4", "--seed", "7", "--format", "csv")
    run(capsys, *args, "--out", str(out_file))
    first = out_file.read_text()
    run(capsys, *args, "--out", str(out_file))
    assert out_file.read_text() == first
    lines = first.splitlines()
    assert lines[0].startswith("trial,seed,N,n1,n2,n3,n4")
    assert [l.split(",")[1] for l in lines[1:]] == ["7", "8", "9", "10"]


def test_adaptive_and_figure(capsys, tmp_path):
    code, out, _ = run(
        capsys, "adaptive", "--strategy", "premeasure", "--N", "20", "--trials", "5", "--out", str(tmp_path)
    )
    assert code == 0 and (tmp_path / "custom_trials.json").exists()
    code, out, _ = run(capsys, "figure", "fig9", "--N", "1", "2", "--trials", "3", "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["summary"].endswith("fig9_summary.json")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"trials": -2}))
    code, _, err = run(capsys, "figure", "fig9", "--config", str(bad), "--out", str(tmp_path))
    assert code == 2 and "trials" in err


def test_pair_and_circuit(capsys):
    q = np.full(16, 1 / 16)
    code, out, _ = run(capsys, "pair", "reconstruct", "--q", *map(str, q))
    d = json.loads(out)
    assert code == 0 and d["positive"] and np.allclose(np.array(d["t"])[1:, 1:], 0)
    code, out, _ = run(capsys, "pair", "calibrate", "--pairs", "200000", "--seed", "1")
    assert code == 0 and json.loads(out)["frobenius_error"] < 0.05
    code, out, _ = run(capsys, "circuit")
    doc = json.loads(out)
    assert code == 0 and len(doc["gates"]) == 9 and doc["wires"] == ["A", "B", "q"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "tetratomo", "circuit", "--format", "csv"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("step,kind")
