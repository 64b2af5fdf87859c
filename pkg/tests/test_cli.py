import json

import pytest

from erdbench import cli
from erdbench.errors import InvariantError


@pytest.fixture(scope="module")
def recording(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "cfg.yaml"
    cfg.write_text("synth:\n  n_trials: 10\n  snr_db: 10\n")
    out = d / "rec.csv"
    assert cli.run(["synth", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    return d, cfg, out


def test_synth_writes_recording_and_truth(recording):
    d, _, out = recording
    assert out.exists()
    truth = json.loads((d / "rec.truth.json").read_text())
    assert len(truth["trials"]) == 10


def test_validate(recording, capsys):
    _, cfg, out = recording
    assert cli.run(["validate", "--config", str(cfg), "--in", str(out)]) == 0
    assert "10 trials (10 valid)" in capsys.readouterr().out


def test_compare_json_and_csv(recording):
    d, cfg, out = recording
    assert cli.run(["compare", "--config", str(cfg), "--in", str(out),
                    "--out", str(d / "r.json")]) == 0
    doc = json.loads((d / "r.json").read_text())
    assert doc["n_trials"] == 10
    assert cli.run(["analyze-novel", "--config", str(cfg), "--in", str(out),
                    "--out", str(d / "tables"), "--format", "csv"]) == 0
    assert (d / "tables" / "table4.csv").read_text().startswith("interval,left,inter,right\n")


def test_bench(recording):
    d, cfg, out = recording
    assert cli.run(["bench", "--config", str(cfg), "--in", str(out),
                    "--out", str(d / "b.json")]) == 0
    doc = json.loads((d / "b.json").read_text())
    assert doc["novel"]["latency_ms"] >= doc["novel"]["group_delay_ms"]


def test_user_errors_exit_1(recording, tmp_path, capsys):
    _, cfg, out = recording
    assert cli.run(["validate", "--config", str(tmp_path / "nope.yaml"), "--in", str(out)]) == 1
    assert "nope.yaml" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("fs=512\nC3,trigger\n1,0\n1\n")
    assert cli.run(["validate", "--in", str(bad)]) == 1
    assert "line 4" in capsys.readouterr().err
    assert cli.run(["compare", "--in", str(tmp_path / "missing.csv"),
                    "--out", str(tmp_path / "x.json")]) == 1
    assert cli.run(["frobnicate"]) == 1
    assert cli.run(["--version"]) == 0


def test_internal_error_exit_2(recording, monkeypatch, tmp_path):
    _, cfg, out = recording

    def boom(*a, **k):
        raise InvariantError("broken")

    monkeypatch.setattr(cli, "run_comparison", boom)
    assert cli.run(["compare", "--in", str(out), "--out", str(tmp_path / "x.json")]) == 2
