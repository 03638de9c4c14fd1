"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line to the terminal
(outside pytest's capture) and then asserts. Together they take about a
quarter of an hour on one core.
"""
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from nestedgp import experiments as ex
from nestedgp.design import maximin_lhs
from nestedgp.gp import SearchConfig
from nestedgp.nested import Analytic, GaussHermite, MonteCarlo, NestedPredictor
from nestedgp.testcases import analytical_codes, ballistic_range

pytestmark = pytest.mark.acceptance

TESTS = Path(__file__).parent


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail, t0):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail} "
                  f"[{time.perf_counter() - t0:.0f} s]")
        assert ok, detail
    return emit


def _medians_at(report, costs):
    med = ex.median_curves(report.series, costs, keys=("error_on_mean", "n1", "n2"))
    return med


def test_1_analytic_engine(verdict):
    t0 = time.perf_counter()
    codes = analytical_codes()
    X = maximin_lhs(codes.nest_domain, 15, seed=11)
    _, m1, m2 = ex.fit_chained(codes, X, SearchConfig(seed=11))
    x1 = np.random.default_rng(1).uniform(-7, 7, (50, 1))
    an = NestedPredictor(m1, m2, Analytic()).moments(x1)
    gh = NestedPredictor(m1, m2, GaussHermite(128)).moments(x1)
    mc = NestedPredictor(m1, m2, MonteCarlo(1_000_000, 1)).moments(x1)
    rel = max(np.max(np.abs(an.m1 - gh.m1) / np.abs(gh.m1)),
              np.max(np.abs(an.m2 - gh.m2) / np.abs(gh.m2)))
    z = max(np.max(np.abs(mc.m1 - an.m1) / mc.m1_se), np.max(np.abs(mc.m2 - an.m2) / mc.m2_se))
    ok = rel < 1e-8 and z <= 3 and time.perf_counter() - t0 < 60
    verdict(1, ok, f"analytic vs GH128 max rel {rel:.2e} (< 1e-8); "
                   f"max |MC - analytic| / SE {z:.2f} (<= 3)", t0)


def test_2_timing_study(verdict):
    t0 = time.perf_counter()
    rep = ex.timing_study(ex.build_config(ex.PRESETS["timing"]))
    rows = {(r["method"], r["sigma"]): r for r in rep.timing}
    sig = sorted({r["sigma"] for r in rep.timing})
    e1 = [rows["linearized", s]["median_rel_err_m1"] for s in sig]
    e2 = [rows["linearized", s]["median_rel_err_m2"] for s in sig]
    mono = all(np.diff(e1) > 0) and all(np.diff(e2) > 0)
    small = e1[0] < 1e-3 and e2[0] < 1e-3
    t_lin = np.median([rows["linearized", s]["seconds_per_query"] for s in sig])
    t_mc = np.median([rows["mc(100)", s]["seconds_per_query"] for s in sig])
    ok = mono and small and t_lin < t_mc and time.perf_counter() - t0 < 300
    verdict(2, ok, f"linearized m1 errors {['%.1e' % v for v in e1]}, m2 "
                   f"{['%.1e' % v for v in e2]}; {t_lin:.1e} s/query vs MC(100) {t_mc:.1e}", t0)


def test_3_method_ordering_analytical(verdict):
    t0 = time.perf_counter()
    cfg = ex.build_config(ex.PRESETS["methods"])
    med = ex.method_comparison(cfg).medians
    sizes = [str(n) for n in cfg.sizes]
    ratio = [max(med["linearized"][n], med["analytic"][n]) /
             min(med["linearized"][n], med["analytic"][n]) for n in sizes]
    below = [med["linearized"][n] < med["blind_box"][n] for n in sizes if int(n) >= 20]
    ok = max(ratio) <= 1.2 and all(below) and time.perf_counter() - t0 < 900
    verdict(3, ok, f"lin/analytic ratio max {max(ratio):.3f} (<= 1.2); linearized below blind box "
                   f"at {sum(below)}/{len(below)} sizes >= 20", t0)


@pytest.fixture(scope="module")
def best_runs():
    t0 = time.perf_counter()
    best_cfg = ex.build_config(ex.PRESETS["best"])
    best = ex.run_experiment(best_cfg)
    lhs = ex.run_experiment(ex.build_config({**ex.PRESETS["best"], "design": "lhs_only"}))
    return best_cfg, best, lhs, time.perf_counter() - t0


def test_4_best_beats_lhs(verdict, best_runs):
    t0 = time.perf_counter()
    cfg, best, lhs, elapsed = best_runs
    chain = cfg.tau1 + cfg.tau2
    # costs reachable by both curves: whole chained designs beyond the initial one
    costs = [c for c in ex.checkpoints(cfg) if c > cfg.initial_cost and c % chain == 0]
    b = _medians_at(best, costs)["error_on_mean"]
    s = _medians_at(lhs, costs)["error_on_mean"]
    wins = [x <= y for x, y in zip(b, s)]
    ok = all(wins) and elapsed < 1800
    verdict(4, ok, f"best <= LHS-only at {sum(wins)}/{len(wins)} matched costs; final "
                   f"{b[-1]:.3e} vs {s[-1]:.3e}", t0 - elapsed)


def test_5_code1_first(verdict, best_runs):
    t0 = time.perf_counter()
    cfg, best, _, _ = best_runs
    half = cfg.initial_cost + 0.5 * (cfg.budget - cfg.initial_cost)
    costs = [c for c in ex.checkpoints(cfg) if cfg.initial_cost < c <= half]
    med = _medians_at(best, costs)
    more = [a > b for a, b in zip(med["n1"], med["n2"])]
    verdict(5, all(more), f"median n1 > n2 at {sum(more)}/{len(more)} checkpoints in the first "
                          f"half of the budget", t0)


def test_6_cost_ratio(verdict):
    t0 = time.perf_counter()
    r12 = ex.run_experiment(ex.build_config(ex.PRESETS["cost_12"]))
    r21 = ex.run_experiment(ex.build_config(ex.PRESETS["cost_21"]))
    cfg = ex.build_config(ex.PRESETS["cost_12"])
    costs = [c for c in ex.checkpoints(cfg) if c > cfg.initial_cost]
    a = _medians_at(r12, costs)["error_on_mean"]
    b = _medians_at(r21, costs)["error_on_mean"]
    frac = float(np.mean([x < y for x, y in zip(a, b)]))
    ok = frac >= 0.8 and time.perf_counter() - t0 < 1800
    verdict(6, ok, f"1:2 below 2:1 at {frac:.0%} of {len(costs)} checkpoints (>= 80%)", t0)


PROPERTY_TESTS = [
    "test_gp.py::test_interpolation_property",
    "test_gp.py::test_training_point_zero_variance",
    "test_gp.py::test_variance_after_obs_never_increases",
    "test_gp.py::test_mean_grad_finite_difference",
    "test_gp.py::test_variance_after_obs_matches_refit",
    "test_polyexp.py::test_x2_exp_bx2_against_mc",
    "test_polyexp.py::test_random_terms_against_mc",
    "test_design.py::test_stratification_50x4",
    "test_design.py::test_stratification_property",
    "test_design.py::test_best_cost_domination_and_scaling",
    "test_design.py::test_best_scale_invariance",
    "test_design.py::test_iv_never_increases",
    "test_experiments.py::test_determinism_and_rerun_from_echo",
    "test_cli.py::test_design_writes_outputs_and_is_deterministic",
]


def test_7_property_suite(verdict):
    t0 = time.perf_counter()
    ids = [str(TESTS / t) for t in PROPERTY_TESTS]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *ids],
                          capture_output=True, text=True, cwd=TESTS.parent)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and time.perf_counter() - t0 < 300
    verdict(7, ok, f"{len(PROPERTY_TESTS)} property tests: {tail}", t0)


def test_8_hydro_pipeline(verdict):
    t0 = time.perf_counter()
    preset = ex.PRESETS["methods_hydro"]
    largest = max(int(n) for n in preset["sizes"].split(","))
    cfg = ex.build_config({**preset, "sizes": str(largest)})
    med = ex.method_comparison(cfg).medians
    lin, bb = med["linearized"][str(largest)], med["blind_box"][str(largest)]
    vac = ballistic_range([[0.0, 100.0, 45.0]])[0]
    rel = abs(vac - 100.0 ** 2 / 9.81) / (100.0 ** 2 / 9.81)
    ok = lin < bb and rel < 1e-4 and time.perf_counter() - t0 < 1800
    verdict(8, ok, f"n={largest}: linearized {lin:.3e} vs blind box {bb:.3e}; vacuum range "
                   f"{vac:.2f} m (rel err {rel:.1e})", t0)
