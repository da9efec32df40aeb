import json
import shutil

import numpy as np
import pytest

from shrinkerlab import cli
from shrinkerlab import flow as fl
from shrinkerlab.errors import ConfigError, SchemaMismatch
from shrinkerlab.experiments import ExperimentConfig, VerificationRecord, run_experiment
from shrinkerlab.geometry import CylinderSamples, circle, ellipse
from shrinkerlab.io import (
    build_model,
    fmt,
    load_trajectory,
    read_curve_csv,
    read_rows,
    save_trajectory,
    write_curve_csv,
    write_rows,
)
from shrinkerlab.regress import regression_compare


def test_fmt_round_trips_floats():
    for x in (0.1, 1 / 3, np.pi * 1e-300, -2.5e17):
        assert float(fmt(x)) == x
    assert fmt(True) == "true"
    assert fmt(np.int64(3)) == "3"


def test_curve_csv_round_trip(tmp_path):
    c = ellipse(2.0, 1.0, 64)
    write_curve_csv(c, tmp_path / "c.csv")
    back = read_curve_csv(tmp_path / "c.csv")
    assert back.closed
    assert np.array_equal(back.nodes, c.nodes)


def test_curve_csv_header_checked(tmp_path):
    (tmp_path / "bad.csv").write_text("1,2\n3,4\n5,6\n")
    with pytest.raises(ValueError):
        read_curve_csv(tmp_path / "bad.csv")
    (tmp_path / "bad2.csv").write_text("# closed=true N=3\n1,2\n3,4\n5,6\n")
    with pytest.raises(ValueError):
        read_curve_csv(tmp_path / "bad2.csv")


def test_manifests(tmp_path):
    cyl = build_model({"kind": "cylinder", "k": 1, "n": 2, "N": 3, "resolution": [32, 101], "rotation_seed": 4})
    assert isinstance(cyl, CylinderSamples)
    write_curve_csv(circle(resolution=64), tmp_path / "c.csv")
    (tmp_path / "m.json").write_text(json.dumps({"kind": "curve", "path": "c.csv"}))
    assert build_model(tmp_path / "m.json").num_nodes == 64
    with pytest.raises(ConfigError, match="k, N"):
        build_model({"kind": "cylinder", "n": 2})
    with pytest.raises(ConfigError, match="unknown model kind"):
        build_model({"kind": "torus"})


def test_trajectory_round_trip(tmp_path):
    c = circle(resolution=64)
    traj = fl.run_flow(c, {"x1": c.nodes[:, 0].copy()}, fl.FlowControls(record_every=50), t0=-1.0, t_end=-0.9)
    save_trajectory(traj, tmp_path / "run")
    back = load_trajectory(tmp_path / "run")
    assert np.array_equal(back.times, traj.times)
    for a, b in zip(traj.states, back.states):
        assert np.array_equal(a.curve.nodes, b.curve.nodes)
        assert np.array_equal(a.fields["x1"], b.fields["x1"])


def test_record_pass_rule():
    assert VerificationRecord.le("a", 1.0, 0.9, 0.2, "p").passed
    assert not VerificationRecord.le("a", 1.0, 0.9, 0.05, "p").passed
    r = VerificationRecord.close("b", 1.0, 1.0 + 1e-9, 1e-8, "p")
    assert r.passed and r.slack <= 0


def test_empty_config_lists_required_fields():
    with pytest.raises(ConfigError, match="name, output"):
        ExperimentConfig.from_ini("")


def test_invalid_tolerance_named():
    text = "[experiment]\nname = entropy\noutput = x\n[controls]\ntol = -1\n"
    with pytest.raises(ConfigError, match="tol"):
        ExperimentConfig.from_ini(text)


def test_unknown_experiment(tmp_path):
    with pytest.raises(ConfigError, match="unknown experiment"):
        run_experiment(ExperimentConfig("nope", str(tmp_path)))


def test_counting_experiment_is_deterministic(tmp_path):
    recs = run_experiment(ExperimentConfig("counting-bound", str(tmp_path / "a")))
    run_experiment(ExperimentConfig("counting-bound", str(tmp_path / "b")))
    assert all(r.passed for r in recs)
    for name in ("records.csv", "counting.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_spectrum_convergence_experiment(tmp_path):
    recs = run_experiment(ExperimentConfig("spectrum-convergence", str(tmp_path)))
    names = [r.name for r in recs]
    assert sum(n.startswith("mu_i <= beta_i") for n in names) == 5
    assert all(r.passed for r in recs)
    rows = read_rows(tmp_path / "dirichlet.csv")
    assert {float(r["r"]) for r in rows} == {4.0, 6.0, 8.0, 10.0, 12.0}


# ----------------------------------------------------------------------------
# regression comparison
# ----------------------------------------------------------------------------


@pytest.fixture
def golden(tmp_path):
    d = tmp_path / "golden"
    write_rows(d / "spectrum.csv", [{"index": i, "mu": m} for i, m in enumerate([0.0, 0.5, 0.5, 1.0])])
    (d / "entropy.json").write_text(json.dumps({"lambda": 1.52, "x0": [0.0, 0.0]}))
    return d


def test_identical_dirs_have_no_diff(golden):
    rep = regression_compare(golden, golden)
    assert rep.differences == [] and rep.passed


def test_small_drift_passes(golden, tmp_path):
    run = tmp_path / "run"
    shutil.copytree(golden, run)
    write_rows(run / "spectrum.csv", [{"index": i, "mu": m} for i, m in enumerate([1e-6, 0.5, 0.5 + 1e-6, 1.0])])
    rep = regression_compare(run, golden, {"mu": 1e-4})
    assert rep.passed and len(rep.differences) == 2


def test_large_drift_names_offender(golden, tmp_path):
    run = tmp_path / "run"
    shutil.copytree(golden, run)
    write_rows(run / "spectrum.csv", [{"index": i, "mu": m} for i, m in enumerate([0.0, 0.5003, 0.5, 1.02])])
    rep = regression_compare(run, golden, {"mu": 1e-4})
    assert not rep.passed
    assert rep.worst.file == "spectrum.csv" and rep.worst.key == "3:mu"
    assert "spectrum.csv [3:mu]" in rep.summary()


def test_schema_mismatch(golden, tmp_path):
    run = tmp_path / "run"
    shutil.copytree(golden, run)
    write_rows(run / "spectrum.csv", [{"index": 0, "eig": 0.0}])
    with pytest.raises(SchemaMismatch):
        regression_compare(run, golden)
    (run / "spectrum.csv").unlink()
    with pytest.raises(SchemaMismatch, match="missing"):
        regression_compare(run, golden)


# ----------------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------------


def test_cli_model_and_spectrum(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "out"))
    manifest = tmp_path / "cyl.json"
    manifest.write_text(json.dumps({"kind": "cylinder", "k": 1, "n": 2, "N": 3, "resolution": [32, 201]}))
    assert cli.main(["model", str(manifest)]) == 0
    assert (tmp_path / "out" / "model" / "nodes.csv").exists()
    assert cli.main(["spectrum", "--model", str(manifest), "--count", "4", "--dirichlet-radius", "6"]) == 0
    rows = read_rows(tmp_path / "out" / "spectrum" / "dirichlet.csv")
    assert len(rows) == 4


def test_cli_entropy_grid(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path))
    m = tmp_path / "al.json"
    m.write_text(json.dumps({"kind": "abresch_langer", "m": 2, "l": 3, "resolution": 512}))
    assert cli.main(["entropy", "--model", str(m), "--entropy-grid", "9,5"]) == 0
    data = json.loads((tmp_path / "entropy" / "entropy.json").read_text())
    assert data["lambda"] > 2


def test_cli_heatkernel_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path))
    m = tmp_path / "c.json"
    write_curve_csv(circle(resolution=128), tmp_path / "c.csv")
    m.write_text(json.dumps({"kind": "curve", "path": "c.csv"}))
    assert cli.main(["heatkernel", "--model", str(m), "--check", "semigroup"]) == 0
    assert cli.main(["heatkernel", "--model", str(m), "--check", "reproducing", "--tol", "1e-8"]) == 0
    # an impossible tolerance turns the record into a failure
    assert cli.main(["heatkernel", "--model", str(m), "--check", "semigroup", "--tol", "1e-30"]) == 1


def test_cli_flow_run_and_diagnose(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path))
    write_curve_csv(ellipse(1.2, 0.9, 96), tmp_path / "e.csv")
    assert cli.main(["flow", "run", "--initial", str(tmp_path / "e.csv"), "--until-singularity", "--out",
                     str(tmp_path / "run")]) == 0
    assert (tmp_path / "run" / "series.csv").exists()
    assert cli.main(["flow", "diagnose", "--run", str(tmp_path / "run"), "--experiment", "zeta"]) == 0
    # the initial ellipse is not near-circular, so the growth check refuses
    assert cli.main(["flow", "diagnose", "--run", str(tmp_path / "run"), "--experiment", "linear-growth"]) == 2


def test_cli_run_config_and_regress(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "c.ini").write_text("[experiment]\nname = counting-bound\noutput = o1\n")
    assert cli.main(["run", "c.ini"]) == 0
    assert cli.main(["regress", "o1", "o1"]) == 0
    (tmp_path / "bad.ini").write_text("[experiment]\n")
    assert cli.main(["run", "bad.ini"]) == 2


def test_cli_verify_subset_fails_on_failed_record(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path))
    assert cli.main(["verify-all", "--only", "counting-bound,stability"]) == 0
    assert cli.main(["verify-all", "--only", "growth-envelope"]) == 1
