import json
import subprocess
import sys

import numpy as np
import pytest

from pinvcontrol import config as config_mod
from pinvcontrol.cli import FIGURES, RunReport, main, preset, reproduce, run
from pinvcontrol.errors import ConfigError
from pinvcontrol.io import read_columns, read_matrix, write_columns
from pinvcontrol.waveforms import BasisSpec, build_basis

SMALL = {
    "name": "small",
    "grid": {"tau": 15.0, "N": 300},
    "optimizer": {"epsilon": 1e-6, "max_iters": 20},
}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_defaults_are_valid():
    cfg = config_mod.from_dict({})
    assert cfg.system == "deterministic" and cfg.basis.n == 12


@pytest.mark.parametrize("name", sorted({p for ps in FIGURES.values() for p in ps}))
def test_presets_round_trip(name):
    cfg = preset(name)
    again = config_mod.from_dict(json.loads(config_mod.dumps(cfg)))
    assert again == cfg


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"basis": {"n": 13}}, "basis.n"),
        ({"basis": {"n": 12, "colour": 1}}, "basis.colour"),
        ({"grid": {"N": 0}}, "grid.N"),
        ({"model": {"m": -1.0}}, "model.m"),
        ({"model": {"kT": "hot"}}, "model.kT"),
        ({"system": "quantum"}, "system"),
        ({"optimizer": {"strategy": "SIMPLEX"}}, "optimizer.strategy"),
        ({"optimizer": {"epsilon": 0}}, "optimizer.epsilon"),
        ({"optimizer": {"algorithm": "newton"}}, "optimizer.algorithm"),
        ({"ensemble": {"M": 0}}, "ensemble.M"),
        ({"basis": None}, "basis"),
        ({"basis": {"csv": "missing.csv"}}, "basis.csv"),
        ({"initial_guess": {"csv": "missing.csv"}}, "initial_guess.csv"),
        ({"post_truncate": True}, "post_truncate"),
        ({"speed": 3}, "speed"),
    ],
)
def test_config_errors_name_the_field(tmp_path, patch, field):
    with pytest.raises(ConfigError) as err:
        config_mod.from_dict({**SMALL, **patch}, base_dir=tmp_path)
    assert err.value.field == field


def test_cli_reports_config_error(tmp_path, capsys):
    path = write_config(tmp_path, {**SMALL, "basis": {"n": 13}})
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "basis.n" in capsys.readouterr().err


def test_cli_reports_bad_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["run", "--config", str(path)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_cli_reports_numerical_failure(tmp_path, capsys):
    write_columns(tmp_path / "u0.csv", {"t": np.arange(300.0), "u": np.full(300, -1e6)})
    path = write_config(tmp_path, {**SMALL, "initial_guess": {"csv": "u0.csv"},
                                   "optimizer": {"strategy": "NONE"}})
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "numerical failure in optimize" in err


def test_run_writes_artifacts(tmp_path):
    cfg = config_mod.from_dict(SMALL)
    report = run(cfg, tmp_path / "o")
    out = tmp_path / "o"
    for name in ("control.csv", "energy.csv", "history.csv", "spectrogram.csv", "report.json"):
        assert (out / name).is_file()
    control = read_columns(out / "control.csv")
    assert list(control) == ["t", "u"] and control["u"].size == 300
    assert list(read_columns(out / "energy.csv")) == ["t", "q", "p", "E"]
    hist = read_columns(out / "history.csv")
    assert hist["objective"][-1] == report.final_objective
    assert report.final_objective < 0.5
    assert report.termination_reason in {"converged", "max_iters"}


def test_report_is_sufficient_to_rerun(tmp_path):
    cfg = config_mod.from_dict(SMALL)
    report = run(cfg, tmp_path / "a")
    saved = RunReport.read(tmp_path / "a" / "report.json")
    assert saved.results == report.results
    cfg2 = config_mod.from_dict(saved.config)
    assert cfg2 == cfg
    run(cfg2, tmp_path / "b")
    for name in report.artifacts.values():
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_langevin_rerun_is_byte_identical(tmp_path, monkeypatch):
    data = {
        "name": "tiny-langevin",
        "system": "langevin",
        "grid": {"tau": 15.0, "N": 300},
        "ensemble": {"M": 40, "base_seed": 3},
        "optimizer": {"algorithm": "steepest_descent", "epsilon": 1e-5, "max_iters": 3},
    }
    path = write_config(tmp_path, data)
    monkeypatch.setenv("PINVCONTROL_WORKERS", "1")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("PINVCONTROL_WORKERS", "3")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "energy.csv" in names
    assert list(read_columns(tmp_path / "a" / "energy.csv")) == ["t", "mean_E", "stderr_E"]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_compare_run_prefixes_artifacts(tmp_path):
    data = {**SMALL, "optimizer": {"algorithm": "steepest_descent", "max_iters": 5,
                                   "strategy": ["PINV", "COEFF", "ORTHO"]}}
    report = run(config_mod.from_dict(data), tmp_path)
    assert list(report.results) == ["PINV", "COEFF", "ORTHO"]
    for s in ("pinv", "coeff", "ortho"):
        assert (tmp_path / f"{s}_control.csv").is_file()
    assert set(read_columns(tmp_path / "history.csv")["strategy"]) == {"PINV", "COEFF", "ORTHO"}


def test_warm_start_feeds_every_strategy(tmp_path):
    data = {**SMALL, "warm_start": {"max_iters": 10},
            "optimizer": {"algorithm": "steepest_descent", "max_iters": 3, "strategy": ["PINV", "ORTHO"]}}
    report = run(config_mod.from_dict(data), tmp_path)
    assert list(report.results) == ["PINV", "ORTHO", "WARM_START", "WARM_START_POST_TRUNCATED"]
    start = report.results["WARM_START_POST_TRUNCATED"].final_objective
    hist = read_columns(tmp_path / "history.csv")
    strategy = np.array(hist["strategy"])
    for s in ("PINV", "ORTHO"):
        assert hist["objective"][strategy == s][0] == pytest.approx(start, rel=1e-12)
        assert report.results[s].final_objective <= start
    assert (tmp_path / "warm_start_history.csv").is_file()


def test_warm_start_needs_basis():
    with pytest.raises(ConfigError) as err:
        config_mod.from_dict({**SMALL, "basis": None, "optimizer": {"strategy": "NONE"},
                              "warm_start": {}})
    assert err.value.field == "warm_start"


def test_basis_from_csv_and_initial_guess(tmp_path):
    B = build_basis(BasisSpec.standard(N=300))
    np.savetxt(tmp_path / "b.csv", B[:6], delimiter=",", fmt="%.17g")
    u0 = B.T @ np.ones(12) * 0.01
    write_columns(tmp_path / "u0.csv", {"t": np.arange(300.0), "u": u0})
    path = write_config(tmp_path, {**SMALL, "basis": {"csv": "b.csv"},
                                   "initial_guess": {"csv": "u0.csv"}})
    report = run(config_mod.load(path), tmp_path / "o")
    assert np.isfinite(report.final_objective)


def test_basis_export(tmp_path, capsys):
    path = write_config(tmp_path, SMALL)
    out = tmp_path / "basis.csv"
    assert main(["basis", "export", "--config", str(path), "--out", str(out)]) == 0
    np.testing.assert_array_equal(read_matrix(out), build_basis(BasisSpec.standard(N=300)))


def test_unknown_figure(tmp_path):
    with pytest.raises(ConfigError):
        reproduce("fig4", tmp_path)


def test_reproduce_fig3(tmp_path):
    reports = reproduce("fig3", tmp_path)
    summary = read_columns(tmp_path / "summary.csv")
    energies = dict(zip(summary["label"], summary["final_objective"]))
    assert energies["NONE"] <= 1e-3 and energies["PINV"] <= 1e-3
    assert energies["POST_TRUNCATED"] > 1.0
    assert [r.name for r in reports] == ["fig3a", "fig3c"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pinvcontrol", "--version"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("pinvcontrol ")
