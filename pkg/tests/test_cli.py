import csv
import json

import numpy as np
import pytest

from nestedgp.cli import main

FAST = ["--set", "n_validation=40", "--set", "n_nest=40", "--set", "n_starts=2",
        "--set", "candidate_pool_size=15", "--set", "lhs_restarts=2"]


def test_lhs_fit_predict_round_trip(tmp_path, capsys):
    lhs_csv = tmp_path / "lhs.csv"
    assert main(["lhs", "--n", "8", "--lower", "0", "--upper", "3", "--seed", "4",
                 "--out", str(lhs_csv)]) == 0
    rows = list(csv.reader(lhs_csv.open()))
    assert rows[0] == ["x0"] and len(rows) == 9
    x = [float(r[0]) for r in rows[1:]]
    assert all(0 <= v <= 3 for v in x)

    data = tmp_path / "data.csv"
    data.write_text("x0,y\n" + "".join(f"{v!r},{float(np.sin(v))!r}\n" for v in x))
    model = tmp_path / "model.json"
    assert main(["fit", "--data", str(data), "--degree", "1", "--out", str(model)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["n"] == 8

    pts = tmp_path / "points.csv"
    pts.write_text("x0\n" + "".join(f"{v!r}\n" for v in x[:3]))
    pred = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model), "--points", str(pts), "--out", str(pred)]) == 0
    out = list(csv.DictReader(pred.open()))
    np.testing.assert_allclose([float(r["mean"]) for r in out], np.sin(x[:3]), atol=1e-6)
    assert all(float(r["variance"]) < 1e-6 for r in out)


def test_design_writes_outputs_and_is_deterministic(tmp_path, capsys):
    out = tmp_path / "run"
    args = ["design", "--set", "repetitions=2", "--set", "initial_design_size=5",
            "--set", "budget=13", "--seed", "7", "--out", str(out)] + FAST
    names = ["rep_0.csv", "rep_1.csv", "summary.json"]
    assert main(args) == 0
    first = [(out / n).read_bytes() for n in names]
    assert main(args + ["--jobs", "2"]) == 0
    assert [(out / n).read_bytes() for n in names] == first
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["master_seed"] == 7
    assert summary["seeds"] == [[7, 0], [7, 1]]


def test_config_file_and_preset(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("repetitions = 1\nsizes = 6\nmethods = blind_box,linearized\n")
    out = tmp_path / "bench"
    assert main(["benchmark", "--preset", "methods", "--config", str(cfg), "--out", str(out)]
                + FAST) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["medians"]) == {"blind_box", "linearized"}
    assert (out / "rep_0.csv").read_text().startswith("rep,size,method,error_on_mean\n")


def test_timing_writes_csv(tmp_path):
    out = tmp_path / "t"
    assert main(["timing", "--set", "timing_redraws=2", "--set", "timing_grid=8",
                 "--set", "timing_sigmas=1e-3,1e-1", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "timing.csv").open()))
    assert len(rows) == 8
    assert set(rows[0]) == {"sigma", "method", "median_rel_err_m1", "median_rel_err_m2",
                            "seconds_per_query"}


@pytest.mark.parametrize("argv", [
    ["design", "--set", "repetitions=0"],
    ["design", "--set", "nonsense"],
    ["design", "--preset", "nope"],
    ["design", "--config", "/nonexistent/run.cfg"],
    ["benchmark", "--set", "testcase=hydro", "--set", "methods=analytic"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_numerical_failure_exits_3(tmp_path, capsys):
    data = tmp_path / "data.csv"
    data.write_text("x0,y\n1.0,2.0\n")
    assert main(["fit", "--data", str(data), "--out", str(tmp_path / "m.json")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_bad_table_exits_2(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("x0,y\n1.0,abc\n")
    assert main(["fit", "--data", str(data)]) == 2
