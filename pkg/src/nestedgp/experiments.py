"""Experiment pipelines: configuration, repetitions, medians and file output.

Every repetition ``r`` draws its randomness from
``SeedSequence(master_seed, spawn_key=(r, purpose))``, so adding repetitions
never changes earlier ones and reruns of a configuration are byte-identical.
"""
import csv
import io
import json
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .design import CostModel, DesignAborted, DesignState, lhs, maximin_lhs, run_sequential
from .gp import Dataset, KrigingModel, SearchConfig, fit_hyperparameters
from .kernels import KernelConfig
from .nested import (Analytic, AnalyticEngine, GaussHermite, Linearized, MonteCarlo,
                     NestedPredictor, linearized_phi_law_moments)
from .nested.mc import phi_law_moments_gh, phi_law_moments_mc
from .testcases import (HydroParams, ValidationSet, analytical_codes, analytical_y2,
                        blind_box_fit, error_on_mean, hydro_codes)

# purposes in the per-repetition spawn key
_DESIGN, _VALID, _INTEG, _CANDS, _FIT, _LHS_SIZE = range(6)

METHODS = ("blind_box", "linearized", "analytic", "mc", "quadrature")
DESIGNS = ("lhs_only", "chained", "best")
TESTCASES = ("analytical", "hydro")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


def parse_method(text):
    """``"mc(1000)"`` -> ``("mc", 1000)``; plain names get ``None``."""
    m = re.fullmatch(r"\s*([a-z_]+)\s*(?:\(\s*(\d+)\s*\))?\s*", str(text))
    if not m or m.group(1) not in METHODS:
        raise ConfigError(f"method: unknown method {text!r}")
    name, n = m.group(1), m.group(2)
    if name in ("mc", "quadrature"):
        if n is None:
            raise ConfigError(f"method: {name} needs a sample count, e.g. {name}(1000)")
        n = int(n)
        if n < (2 if name == "mc" else 1):
            raise ConfigError(f"method: {name}({n}) has too few samples")
    elif n is not None:
        raise ConfigError(f"method: {name} takes no argument")
    return name, n


def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _strs(text):
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    testcase: str = "analytical"
    method: str = "linearized"
    design: str = "best"
    tau1: float = 1.0
    tau2: float = 1.0
    initial_design_size: int = 10
    budget: float = 50.0          # total cost, initial design included
    repetitions: int = 50
    master_seed: int = 0
    output_dir: str = "runs/out"
    n_nest: int = 1000
    n_validation: int = 1000
    candidate_pool_size: int = 200
    refit_every: int = 1
    n_starts: int = 10
    lhs_restarts: int = 10
    checkpoint_step: float = 0.0  # 0 means min(tau1, tau2)
    sizes: tuple = (10, 15, 20, 25, 30, 35, 40)
    methods: tuple = ()           # empty: blind_box, linearized and, when available, analytic
    timing_sigmas: tuple = (1e-4, 1e-3, 1e-2, 1e-1)
    timing_redraws: int = 50
    timing_grid: int = 100
    hydro: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def costs(self):
        return CostModel(self.tau1, self.tau2)

    @property
    def comparison_methods(self):
        if self.methods:
            return self.methods
        if self.testcase == "analytical":
            return ("blind_box", "linearized", "analytic")
        return ("blind_box", "linearized")

    @property
    def initial_cost(self):
        return self.initial_design_size * (self.tau1 + self.tau2)

    def validate(self):
        if self.testcase not in TESTCASES:
            raise ConfigError(f"testcase: expected one of {TESTCASES}, got {self.testcase!r}")
        if self.design not in DESIGNS:
            raise ConfigError(f"design: expected one of {DESIGNS}, got {self.design!r}")
        name, _ = parse_method(self.method)
        for m in self.methods:
            parse_method(m)
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ConfigError("tau1/tau2: costs must be positive")
        if self.repetitions < 1:
            raise ConfigError("repetitions: must be at least 1")
        if not self.budget > 0:
            raise ConfigError("budget: must be positive")
        if self.initial_design_size < 2:
            raise ConfigError("initial_design_size: must be at least 2")
        if self.budget < self.initial_cost - 1e-12:
            raise ConfigError(f"budget: {self.budget} is below the initial design cost "
                              f"{self.initial_cost}")
        for key in ("n_nest", "n_validation", "candidate_pool_size", "refit_every", "n_starts",
                    "lhs_restarts", "timing_redraws", "timing_grid"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be positive")
        if self.master_seed < 0:
            raise ConfigError("master_seed: must be non-negative")
        analytic_used = name == "analytic" or any(parse_method(m)[0] == "analytic"
                                                  for m in self.methods)
        if analytic_used and self.testcase != "analytical":
            raise ConfigError("method: analytic needs the analytical testcase "
                              "(Gaussian kernels and poly-exp trend)")
        if name == "blind_box" and self.design != "lhs_only":
            raise ConfigError("method: blind_box only applies to the lhs_only design")
        try:
            HydroParams(**self.hydro)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"hydro: {exc}") from exc
        codes = make_codes(self)
        n_trend = max(len(codes.basis1), len(codes.basis2))
        smallest = min((self.initial_design_size,) + tuple(self.sizes))
        if smallest <= n_trend:
            raise ConfigError(f"initial_design_size/sizes: need more than {n_trend} points to "
                              f"fit the trend and estimate hyperparameters, got {smallest}")

    def to_dict(self):
        d = asdict(self)
        for k in ("sizes", "methods", "timing_sigmas"):
            d[k] = list(d[k])
        d["hydro"] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.hydro.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k, conv in (("sizes", tuple), ("methods", tuple), ("timing_sigmas", tuple)):
            if k in d:
                d[k] = conv(d[k])
        if "hydro" in d:
            d["hydro"] = {k: tuple(v) if isinstance(v, list) else v for k, v in d["hydro"].items()}
        return cls(**d)


_CONVERTERS = {"sizes": _ints, "methods": _strs, "timing_sigmas": _floats}
_HYDRO_TUPLES = ("height", "half_angle_deg", "speed", "elevation_deg")


def _convert(key, value):
    if key.startswith("hydro_"):
        sub = key[len("hydro_"):]
        if sub not in {f.name for f in fields(HydroParams)}:
            raise ConfigError(f"{key}: unknown hydrodynamic parameter")
        try:
            return sub, (_floats(value) if sub in _HYDRO_TUPLES else float(value))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if key not in types or key == "hydro":
        raise ConfigError(f"{key}: unknown configuration key")
    try:
        if key in _CONVERTERS:
            return key, _CONVERTERS[key](value)
        conv = {int: int, float: float, str: str, "int": int, "float": float,
                "str": str}[types[key]]
        return key, conv(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc


def parse_config_text(text):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def build_config(base=None, pairs=None):
    """Config from a preset/base dict of strings plus ``key=value`` overrides."""
    raw = dict(base or {})
    raw.update(pairs or {})
    kw, hydro = {}, {}
    for k, v in raw.items():
        key, val = _convert(k, v)
        if k.startswith("hydro_"):
            hydro[key] = val
        else:
            kw[key] = val
    if hydro:
        kw["hydro"] = hydro
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


PRESETS = {
    "methods": {"design": "lhs_only", "sizes": "10,15,20,25,30,35,40",
                "methods": "blind_box,linearized,analytic", "repetitions": "50"},
    "methods_hydro": {"testcase": "hydro", "design": "lhs_only", "sizes": "10,20,30,40,50",
                      "methods": "blind_box,linearized", "repetitions": "50"},
    "best": {"design": "best", "initial_design_size": "10", "budget": "50",
             "repetitions": "50"},
    "best_hydro": {"testcase": "hydro", "design": "best", "initial_design_size": "20",
                   "budget": "70", "repetitions": "50"},
    "cost_12": {"design": "best", "tau1": "1", "tau2": "2", "initial_design_size": "15",
                "budget": "75", "repetitions": "50"},
    "cost_21": {"design": "best", "tau1": "2", "tau2": "1", "initial_design_size": "15",
                "budget": "75", "repetitions": "50"},
    "cost_hydro_12": {"testcase": "hydro", "design": "best", "tau1": "1", "tau2": "2",
                      "initial_design_size": "30", "budget": "120", "repetitions": "50"},
    "cost_hydro_21": {"testcase": "hydro", "design": "best", "tau1": "2", "tau2": "1",
                      "initial_design_size": "30", "budget": "120", "repetitions": "50"},
    "timing": {"repetitions": "1", "timing_redraws": "50", "timing_grid": "100"},
}


# ---------------------------------------------------------------------------
# Seeds and models
# ---------------------------------------------------------------------------

def rep_seed(config, r, *purpose):
    return np.random.SeedSequence(config.master_seed, spawn_key=(int(r),) + tuple(purpose))


def _int_seed(ss):
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def make_codes(config):
    if config.testcase == "analytical":
        return analytical_codes()
    return hydro_codes(HydroParams(**config.hydro))


def _search(config, r, *purpose):
    return SearchConfig(n_starts=config.n_starts, seed=_int_seed(rep_seed(config, r, _FIT,
                                                                          *purpose)))


def fit_chained(codes, X, search):
    """Fit both code models on a chained design; returns (codes, model1, model2)."""
    data1, data2 = codes.chained_data(X)
    codes = codes.calibrate_phi1_min(data1.outputs)
    k1 = fit_hyperparameters(data1, codes.basis1, codes.kernel1, search)
    k2 = fit_hyperparameters(data2, codes.basis2, codes.kernel2, search)
    return codes, KrigingModel(data1, codes.basis1, k1), KrigingModel(data2, codes.basis2, k2)


def blind_box_template(codes):
    d = codes.d1 + codes.d2
    return KernelConfig(codes.kernel2.family, (1.0,) * d)


def nested_mean(method, model1, model2, X, codes):
    """Predicted nested mean at rows of X_1 x X_2 for a nested method name."""
    name, n = parse_method(method)
    strategy = {"linearized": Linearized(), "analytic": Analytic()}.get(name)
    if name == "mc":
        strategy = MonteCarlo(n, 0)
    elif name == "quadrature":
        strategy = GaussHermite(n)
    return NestedPredictor(model1, model2, strategy).moments_nested(X).m1


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

REP_FIELDS = ["step", "code", "cost", "error_on_mean", "integrated_variance", "n1", "n2"]


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def csv_to_rows(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            try:
                conv[k] = int(v)
            except ValueError:
                try:
                    conv[k] = float(v)
                except ValueError:
                    conv[k] = v
        out.append(conv)
    return out


@dataclass
class RunReport:
    config: dict
    seeds: list
    series: list                      # one list of row dicts per repetition
    medians: dict = field(default_factory=dict)
    timing: list = field(default_factory=list)
    meta: list = field(default_factory=list)
    complete: bool = True

    def summary(self):
        return {"config": self.config, "seeds": self.seeds, "medians": self.medians,
                "meta": self.meta, "complete": self.complete}

    def write(self, out_dir, rep_columns=REP_FIELDS):
        os.makedirs(out_dir, exist_ok=True)
        for r, rows in enumerate(self.series):
            with open(os.path.join(out_dir, f"rep_{r}.csv"), "w", newline="") as fh:
                fh.write(rows_to_csv(rows, rep_columns))
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if self.timing:
            cols = list(self.timing[0].keys())
            with open(os.path.join(out_dir, "timing.csv"), "w", newline="") as fh:
                fh.write(rows_to_csv(self.timing, cols))


def checkpoints(config):
    step = config.checkpoint_step or min(config.tau1, config.tau2)
    n = int(np.floor((config.budget - config.initial_cost) / step + 1e-9))
    return [config.initial_cost + k * step for k in range(n + 1)]


def value_at_cost(rows, cost, key="error_on_mean"):
    """Value of the last row whose cumulative cost does not exceed ``cost``."""
    best = None
    for row in rows:
        if row["cost"] <= cost + 1e-9:
            best = row[key]
    return best


def median_curves(series, cps, keys=("error_on_mean", "integrated_variance", "n1", "n2")):
    out = {"cost": list(map(float, cps))}
    for key in keys:
        meds = []
        for c in cps:
            vals = [value_at_cost(rows, c, key) for rows in series]
            vals = [v for v in vals if v is not None]
            meds.append(float(np.median(vals)) if len(vals) == len(series) else None)
        out[key] = meds
    return out


# ---------------------------------------------------------------------------
# Repetitions
# ---------------------------------------------------------------------------

def _row(step, code, cost, err, iv, n1, n2):
    return {"step": step, "code": code, "cost": float(cost), "error_on_mean": float(err),
            "integrated_variance": float(iv), "n1": int(n1), "n2": int(n2)}


def _state(codes, model1, model2, config, r):
    return DesignState(model1.data, model2.data, codes.basis1, codes.basis2, model1.kernel,
                       model2.kernel, codes.domain1, codes.domain2, config.costs,
                       config.n_nest, rep_seed(config, r, _INTEG), _search(config, r, 1))


def _iv(state):
    return float(np.mean(state._var2 + state._g2 * state._var1))


def _lhs_only_rows(config, r, codes0, validation):
    rows = []
    n = config.initial_design_size
    chain_cost = config.tau1 + config.tau2
    step = 0
    integ = None
    while n * chain_cost <= config.budget + 1e-9:
        # the smallest design is the one sequential runs start from
        seed = (rep_seed(config, r, _DESIGN) if n == config.initial_design_size
                else rep_seed(config, r, _LHS_SIZE, n))
        X = maximin_lhs(codes0.nest_domain, n, seed, restarts=config.lhs_restarts)
        if parse_method(config.method)[0] == "blind_box":
            data = Dataset(X, codes0.nested(X))
            model = blind_box_fit(data, blind_box_template(codes0), _search(config, r, 0, n))
            mean = model.mean(validation.inputs)
            if integ is None:
                integ = lhs(codes0.nest_domain, config.n_nest, rep_seed(config, r, _INTEG))
            iv = float(np.mean(model.predict(integ)[1]))
        else:
            fit_seed = (_search(config, r, 0) if n == config.initial_design_size
                        else _search(config, r, 0, n))
            codes, m1, m2 = fit_chained(codes0, X, fit_seed)
            mean = nested_mean(config.method, m1, m2, validation.inputs, codes)
            iv = _iv(_state(codes, m1, m2, config, r))
        rows.append(_row(step, "lhs", n * chain_cost, error_on_mean(validation, mean), iv, n, n))
        n += 1
        step += 1
    return rows, {}


def _sequential_rows(config, r, codes0, validation):
    X0 = maximin_lhs(codes0.nest_domain, config.initial_design_size, rep_seed(config, r, _DESIGN),
                     restarts=config.lhs_restarts)
    codes, m1, m2 = fit_chained(codes0, X0, _search(config, r, 0))
    state = _state(codes, m1, m2, config, r)
    init = config.initial_cost

    def err(st):
        return error_on_mean(validation, nested_mean(config.method, st.model1, st.model2,
                                                     validation.inputs, codes))

    rows = [_row(0, "init", init, err(state), _iv(state), m1.n, m2.n)]

    def callback(st, rec):
        rows.append(_row(rec.step + 1, rec.code, init + rec.cumulative_cost, err(st), _iv(st),
                         rec.n1, rec.n2))

    meta = {"phi1_min": codes.phi1_min, "complete": True}
    if config.budget - init >= (config.costs.chained if config.design == "chained"
                                else min(config.tau1, config.tau2)):
        try:
            run_sequential(state, codes, config.design, config.budget - init,
                           refit_every=config.refit_every, pool_size=config.candidate_pool_size,
                           seed=rep_seed(config, r, _CANDS), callback=callback)
        except DesignAborted as exc:
            meta.update(complete=False, error=str(exc))
    return rows, meta


def run_repetition(config, r):
    codes = make_codes(config)
    validation = ValidationSet.draw(codes, config.n_validation, rep_seed(config, r, _VALID))
    if config.design == "lhs_only":
        return _lhs_only_rows(config, r, codes, validation)
    return _sequential_rows(config, r, codes, validation)


def _map(func, args, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(func, *zip(*args)))
    return [func(*a) for a in args]


def run_experiment(config, jobs=1):
    """Run every repetition of a design study and aggregate medians.

    Returns
    -------
    RunReport
        ``series[r]`` lists one row per design step with the cumulative cost,
        the error on the mean over the repetition's validation set, the
        integrated variance and the per-code evaluation counts.
    """
    reps = list(range(config.repetitions))
    results = _map(run_repetition, [(config, r) for r in reps], jobs)
    series = [rows for rows, _ in results]
    meta = [m for _, m in results]
    report = RunReport(config.to_dict(), [[config.master_seed, r] for r in reps], series,
                       meta=meta, complete=all(m.get("complete", True) for m in meta))
    report.medians = median_curves(series, checkpoints(config))
    return report


# ---------------------------------------------------------------------------
# Method comparison over design sizes
# ---------------------------------------------------------------------------

BENCH_FIELDS = ["rep", "size", "method", "error_on_mean"]


def _bench_repetition(config, r):
    codes0 = make_codes(config)
    validation = ValidationSet.draw(codes0, config.n_validation, rep_seed(config, r, _VALID))
    rows = []
    for n in config.sizes:
        X = maximin_lhs(codes0.nest_domain, n, rep_seed(config, r, _LHS_SIZE, n),
                        restarts=config.lhs_restarts)
        validation.check_disjoint(X)
        fitted = None
        for method in config.comparison_methods:
            if parse_method(method)[0] == "blind_box":
                model = blind_box_fit(Dataset(X, codes0.nested(X)), blind_box_template(codes0),
                                      _search(config, r, 0, n))
                mean = model.mean(validation.inputs)
            else:
                if fitted is None:
                    fitted = fit_chained(codes0, X, _search(config, r, 0, n))
                codes, m1, m2 = fitted
                mean = nested_mean(method, m1, m2, validation.inputs, codes)
            rows.append({"rep": r, "size": int(n), "method": method,
                         "error_on_mean": error_on_mean(validation, mean)})
    return rows


def method_comparison(config, jobs=1):
    """Error on the mean of several nested methods over maximin LHS designs of
    increasing size."""
    reps = list(range(config.repetitions))
    series = _map(_bench_repetition, [(config, r) for r in reps], jobs)
    med = {}
    for method in config.comparison_methods:
        med[method] = {str(n): float(np.median([row["error_on_mean"] for rows in series
                                                for row in rows
                                                if row["method"] == method and row["size"] == n]))
                       for n in config.sizes}
    return RunReport(config.to_dict(), [[config.master_seed, r] for r in reps], series,
                     medians=med)


# ---------------------------------------------------------------------------
# Moment-engine accuracy and timing
# ---------------------------------------------------------------------------

def timing_code2_model(search=None):
    """Code-2 model of the analytical example on a 20-point grid over [-2, 4]."""
    codes = analytical_codes()
    phi = np.linspace(-2.0, 4.0, 20)
    data = Dataset(phi[:, None], analytical_y2(phi))
    k = fit_hyperparameters(data, codes.basis2, codes.kernel2, search or SearchConfig())
    return KrigingModel(data, codes.basis2, k)


def _rel(est, ref):
    return np.abs(est - ref) / np.abs(ref)


def timing_study(config):
    """Accuracy and cost of MC(100), MC(1000) and the linearized moments against
    the closed-form ones, over a grid of code-1 means and several code-1
    standard deviations.

    Returns
    -------
    RunReport
        ``timing`` holds one row per (sigma, method) with median relative
        errors of both moments and the wall time per query point.
    """
    model2 = timing_code2_model(SearchConfig(n_starts=config.n_starts,
                                             seed=_int_seed(rep_seed(config, 0, _FIT))))
    engine = AnalyticEngine(model2)
    mu = np.linspace(-2.0, 4.0, config.timing_grid)
    X2 = np.zeros((mu.shape[0], 0))
    rows, meta = [], []
    for sigma in config.timing_sigmas:
        s2 = np.full(mu.shape, sigma ** 2)
        t0 = time.perf_counter()
        ref = engine.moments(mu, s2, X2)
        t_an = time.perf_counter() - t0
        quad = phi_law_moments_gh(model2, mu, s2, X2, 128)
        disc = float(max(np.max(_rel(quad.m1, ref.m1)), np.max(_rel(quad.m2, ref.m2))))
        meta.append({"sigma": float(sigma), "analytic_vs_quadrature": disc})
        t0 = time.perf_counter()
        lin = linearized_phi_law_moments(model2, mu, s2, X2)
        t_lin = time.perf_counter() - t0
        rows.append(_timing_row(sigma, "analytic", 0.0, 0.0, t_an / mu.size))
        rows.append(_timing_row(sigma, "linearized", np.median(_rel(lin.m1, ref.m1)),
                                np.median(_rel(lin.m2, ref.m2)), t_lin / mu.size))
        for n in (100, 1000):
            e1, e2, tt = [], [], 0.0
            for k in range(config.timing_redraws):
                seed = rep_seed(config, 0, _CANDS, int(n), k)
                t0 = time.perf_counter()
                est = phi_law_moments_mc(model2, mu, s2, X2, n, seed)
                tt += time.perf_counter() - t0
                e1.append(_rel(est.m1, ref.m1))
                e2.append(_rel(est.m2, ref.m2))
            rows.append(_timing_row(sigma, f"mc({n})", np.median(e1), np.median(e2),
                                    tt / (config.timing_redraws * mu.size)))
    report = RunReport(config.to_dict(), [[config.master_seed, 0]], [], timing=rows, meta=meta)
    report.medians = {f"{row['method']}@{row['sigma']:g}": [row["median_rel_err_m1"],
                                                            row["median_rel_err_m2"]]
                      for row in rows}
    return report


def _timing_row(sigma, method, e1, e2, t):
    return {"sigma": float(sigma), "method": method, "median_rel_err_m1": float(e1),
            "median_rel_err_m2": float(e2), "seconds_per_query": float(t)}
