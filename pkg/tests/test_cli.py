"""Command-line interface: subcommands, exit codes, overrides, report."""

import json
import os

import numpy as np
import pytest

from atomimo import cli
from atomimo.experiments import EXPERIMENTS
from atomimo.numerics import NumericFailure

DOF_DOC = {
    "experiment": "dof_slope",
    "dims": {"nt": 2, "nr": 4, "ns": 2},
    "sweep": {"axis": "snr_db", "grid": [30.0, 35.0, 40.0]},
    "trials": 3,
    "seed": 5,
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_list_experiments(capsys):
    assert cli.main(["list-experiments"]) == 0
    out = capsys.readouterr().out.split()
    assert out == list(EXPERIMENTS)


def test_validate_ok(tmp_path, capsys):
    path = write_config(tmp_path, DOF_DOC)
    assert cli.main(["validate", "--config", path]) == 0
    assert "config ok" in capsys.readouterr().out


def test_validate_bad_config_exits_2(tmp_path, capsys):
    doc = dict(DOF_DOC, trials=0)
    path = write_config(tmp_path, doc)
    assert cli.main(["validate", "--config", path]) == 2
    assert "trials" in capsys.readouterr().err


def test_validate_unparsable_json_exits_2(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert cli.main(["validate", "--config", str(path)]) == 2


def test_missing_config_exits_4(tmp_path):
    assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 4


def test_run_writes_results_and_reruns_identically(tmp_path, capsys):
    cfg = write_config(tmp_path, DOF_DOC)
    out1 = tmp_path / "r1.csv"
    out2 = tmp_path / "r2.csv"
    assert cli.main(["run", "--config", cfg, "--out", str(out1)]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(out2), "--jobs", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    stdout = capsys.readouterr().out
    assert "slope_iq" in stdout


def test_run_seed_and_override_change_output(tmp_path):
    cfg = write_config(tmp_path, DOF_DOC)
    base, seeded, overridden = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    assert cli.main(["run", "--config", cfg, "--out", str(base)]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(seeded), "--seed", "99"]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(overridden),
                     "--override", "dims.nr=3"]) == 0
    assert base.read_bytes() != seeded.read_bytes()
    assert base.read_bytes() != overridden.read_bytes()


def test_run_json_format(tmp_path):
    cfg = write_config(tmp_path, dict(DOF_DOC, format="json"))
    out = tmp_path / "r.json"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    parsed = json.loads(out.read_text())
    assert parsed[0]["experiment"] == "dof_slope"


def test_run_unwritable_out_exits_4(tmp_path):
    cfg = write_config(tmp_path, DOF_DOC)
    out = tmp_path / "no_such_dir" / "r.csv"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 4


def test_numeric_failure_exits_3(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, DOF_DOC)

    def boom(cfg, jobs=1):
        raise NumericFailure("synthetic failure")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["run", "--config", cfg]) == 3


def test_convergence_run_emits_traces_and_report(tmp_path):
    doc = {
        "experiment": "convergence",
        "dims": {"nt": 8, "nr": 4, "ns": 1},
        "sweep": {"axis": "n_rf", "grid": [4.0]},
        "trials": 2,
        "seed": 1,
        "altmin": {"architecture": "fc", "max_iter": 40},
    }
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "conv.csv"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    traces = sorted(p.name for p in tmp_path.glob("conv_trace_*.csv"))
    assert traces == ["conv_trace_nrf4_t0.csv", "conv_trace_nrf4_t1.csv"]
    figs = tmp_path / "figs"
    assert cli.main(["report", "--results", str(out), "--out-dir", str(figs)]) == 0
    names = sorted(p.name for p in figs.glob("*.png"))
    assert names == ["convergence_residual.png", "convergence_traces.png"]


def test_report_dof(tmp_path):
    cfg = write_config(tmp_path, DOF_DOC)
    out = tmp_path / "dof.csv"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    figs = tmp_path / "figs"
    assert cli.main(["report", "--results", str(out), "--out-dir", str(figs)]) == 0
    assert (figs / "dof_slope.png").exists()
