import json

import numpy as np
import pytest

from nestedgp import experiments as ex

TINY = {"repetitions": "2", "n_validation": "60", "n_nest": "60", "n_starts": "2",
        "candidate_pool_size": "20", "lhs_restarts": "2"}


def tiny(**kw):
    return ex.build_config({**TINY, **{k: str(v) for k, v in kw.items()}})


def test_parse_config_text():
    text = "# comment\ntestcase = hydro  # trailing\n\nsizes = 10, 20\nhydro_speed = 120,250\n"
    raw = ex.parse_config_text(text)
    assert raw == {"testcase": "hydro", "sizes": "10, 20", "hydro_speed": "120,250"}
    cfg = ex.build_config(raw)
    assert cfg.sizes == (10, 20)
    assert cfg.hydro == {"speed": (120.0, 250.0)}
    with pytest.raises(ex.ConfigError, match="line 1"):
        ex.parse_config_text("no equals sign")


@pytest.mark.parametrize("pairs,field", [
    ({"repetitions": "0"}, "repetitions"),
    ({"budget": "-1"}, "budget"),
    ({"budget": "5"}, "budget"),
    ({"testcase": "hydro", "method": "analytic", "design": "chained"}, "analytic"),
    ({"method": "mc(abc)"}, "method"),
    ({"bogus": "1"}, "bogus"),
    ({"hydro_colour": "1"}, "hydro_colour"),
    ({"tau1": "0"}, "tau1"),
    ({"testcase": "nope"}, "testcase"),
    ({"method": "blind_box", "design": "best"}, "blind_box"),
    ({"initial_design_size": "x"}, "initial_design_size"),
])
def test_invalid_configs_name_the_field(pairs, field):
    with pytest.raises(ex.ConfigError, match=field):
        ex.build_config(pairs)


def test_parse_method():
    assert ex.parse_method("mc(500)") == ("mc", 500)
    assert ex.parse_method("quadrature(32)") == ("quadrature", 32)
    assert ex.parse_method("linearized")[0] == "linearized"


def test_config_round_trip():
    cfg = ex.build_config({**ex.PRESETS["cost_hydro_12"], "hydro_height": "0.3,0.9"})
    again = ex.ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_rep_seeds_do_not_depend_on_repetition_count():
    a, b = tiny(repetitions=2), tiny(repetitions=5)
    for r in range(2):
        sa, sb = ex.rep_seed(a, r, 0), ex.rep_seed(b, r, 0)
        assert np.array_equal(sa.generate_state(4), sb.generate_state(4))
    assert not np.array_equal(ex.rep_seed(a, 0, 0).generate_state(4),
                              ex.rep_seed(a, 1, 0).generate_state(4))


def test_lhs_only_at_initial_cost_gives_single_value():
    cfg = tiny(repetitions=1, design="lhs_only", initial_design_size=6, budget=12)
    rep = ex.run_experiment(cfg)
    assert len(rep.series) == 1 and len(rep.series[0]) == 1
    row = rep.series[0][0]
    assert row["cost"] == 12.0 and 0 <= row["error_on_mean"]
    assert rep.medians["error_on_mean"] == [row["error_on_mean"]]


@pytest.fixture(scope="module")
def best_report():
    return ex.run_experiment(tiny(design="best", initial_design_size=5, budget=14))


def test_sequential_report_invariants(best_report):
    cfg = ex.ExperimentConfig.from_dict(best_report.config)
    for rows in best_report.series:
        assert rows[0]["code"] == "init"
        for row in rows[1:]:
            acq = row["step"]
            assert (row["n1"] - 5) + (row["n2"] - 5) == acq
            assert row["cost"] <= cfg.budget + 1e-9
        assert [r["cost"] for r in rows] == sorted(r["cost"] for r in rows)
    assert best_report.complete


def test_medians_match_recomputation_from_files(best_report, tmp_path):
    best_report.write(tmp_path)
    series = [ex.csv_to_rows((tmp_path / f"rep_{r}.csv").read_text())
              for r in range(len(best_report.series))]
    cfg = ex.ExperimentConfig.from_dict(best_report.config)
    cps = ex.checkpoints(cfg)
    summary = json.loads((tmp_path / "summary.json").read_text())
    for k, cost in enumerate(cps):
        vals = [max((r for r in rows if r["cost"] <= cost + 1e-9), key=lambda r: r["cost"])
                ["error_on_mean"] for rows in series]
        assert len(vals) == cfg.repetitions
        assert summary["medians"]["error_on_mean"][k] == float(np.median(vals))


def test_csv_round_trip(best_report):
    text = ex.rows_to_csv(best_report.series[0], ex.REP_FIELDS)
    assert ex.rows_to_csv(ex.csv_to_rows(text), ex.REP_FIELDS) == text


def test_determinism_and_rerun_from_echo(best_report, tmp_path):
    best_report.write(tmp_path / "a")
    cfg = ex.ExperimentConfig.from_dict(json.loads((tmp_path / "a" / "summary.json").read_text())
                                        ["config"])
    ex.run_experiment(cfg).write(tmp_path / "b")
    for name in ["summary.json", "rep_0.csv", "rep_1.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_matches_serial(tmp_path):
    cfg = tiny(design="chained", initial_design_size=5, budget=14)
    serial = ex.run_experiment(cfg)
    parallel = ex.run_experiment(cfg, jobs=2)
    assert serial.summary() == parallel.summary()
    assert serial.series == parallel.series


def test_method_comparison_medians():
    cfg = tiny(design="lhs_only", sizes="6,8", methods="blind_box,linearized,mc(200)")
    rep = ex.method_comparison(cfg)
    assert set(rep.medians) == {"blind_box", "linearized", "mc(200)"}
    vals = [row["error_on_mean"] for rows in rep.series for row in rows
            if row["method"] == "linearized" and row["size"] == 8]
    assert rep.medians["linearized"]["8"] == float(np.median(vals))


def test_hydro_repetition_runs():
    cfg = tiny(testcase="hydro", repetitions=1, design="best", initial_design_size=6, budget=14)
    rep = ex.run_experiment(cfg)
    assert rep.complete
    assert rep.meta[0]["phi1_min"] > 0
    assert np.isfinite(rep.series[0][-1]["error_on_mean"])


def test_timing_study_small():
    cfg = tiny(timing_redraws=3, timing_grid=10)
    rep = ex.timing_study(cfg)
    methods = {row["method"] for row in rep.timing}
    assert methods == {"analytic", "linearized", "mc(100)", "mc(1000)"}
    assert len(rep.timing) == 4 * len(cfg.timing_sigmas)
    assert all(m["analytic_vs_quadrature"] < 1e-8 for m in rep.meta)


def test_design_too_small_for_trend():
    with pytest.raises(ex.ConfigError, match="initial_design_size"):
        ex.build_config({"initial_design_size": "4", "budget": "20"})
