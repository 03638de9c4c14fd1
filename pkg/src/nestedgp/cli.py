"""Command-line entry point: ``nestedgp <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np
from scipy import linalg

from . import experiments as ex
from .design import Box, maximin_lhs
from .gp import (Dataset, KrigingError, KrigingModel, SearchConfig, TrendBasis,
                 fit_hyperparameters)
from .kernels import KernelConfig
from .testcases import PhysicsError

log = logging.getLogger("nestedgp")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _config(args, extra=None):
    raw = {}
    if getattr(args, "preset", None):
        if args.preset not in ex.PRESETS:
            raise ex.ConfigError(f"preset: unknown preset {args.preset!r}")
        raw.update(ex.PRESETS[args.preset])
    if args.config:
        with open(args.config) as fh:
            raw.update(ex.parse_config_text(fh.read()))
    raw.update(extra or {})
    for item in args.set or []:
        if "=" not in item:
            raise ex.ConfigError(f"--set {item!r}: expected key=value")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    if args.seed is not None:
        raw["master_seed"] = str(args.seed)
    if args.out is not None:
        raw["output_dir"] = args.out
    return ex.build_config(raw)


def _read_table(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return np.array([[float(v) for v in r] for r in rows[1:]]), rows[0]
    except (ValueError, IndexError) as exc:
        raise ex.ConfigError(f"{path}: expected a header row and numeric columns") from exc


def _basis(degree, dim):
    return TrendBasis.constant() if degree == 0 else TrendBasis.polynomial(degree)


def cmd_fit(args):
    table, _ = _read_table(args.data)
    X, y = table[:, :-1], table[:, -1]
    if args.degree > 0 and X.shape[1] != 1:
        raise ex.ConfigError("--degree > 0 needs one input column")
    basis = _basis(args.degree, X.shape[1])
    data = Dataset(X, y)
    kern = fit_hyperparameters(data, basis, KernelConfig(args.kernel, (1.0,) * X.shape[1]),
                               SearchConfig(seed=args.seed or 0))
    model = KrigingModel(data, basis, kern)
    doc = {"inputs": X.tolist(), "outputs": y.tolist(), "degree": args.degree,
           "kernel": kern.to_dict(), "summary": model.summary()}
    out = args.out or "model.json"
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(model.summary(), sort_keys=True))


def cmd_predict(args):
    with open(args.model) as fh:
        doc = json.load(fh)
    X = np.asarray(doc["inputs"], dtype=float)
    kern = dict(doc["kernel"])
    model = KrigingModel(Dataset(X, np.asarray(doc["outputs"])), _basis(doc["degree"], X.shape[1]),
                         KernelConfig(**kern))
    Q, _ = _read_table(args.points)
    mean, var = model.predict(Q)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j}" for j in range(Q.shape[1])] + ["mean", "variance"])
    for q, m, v in zip(Q, mean, var):
        w.writerow([repr(float(t)) for t in q] + [repr(float(m)), repr(float(v))])
    _emit(buf.getvalue(), args.out, "predictions.csv")


def cmd_lhs(args):
    lo = [float(v) for v in args.lower.split(",")]
    hi = [float(v) for v in args.upper.split(",")]
    X = maximin_lhs(Box(lo, hi), args.n, args.seed or 0, restarts=args.restarts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j}" for j in range(X.shape[1])])
    for row in X:
        w.writerow([repr(float(v)) for v in row])
    _emit(buf.getvalue(), args.out, "lhs.csv")


def _emit(text, out, default_name):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = os.path.join(out, default_name) if os.path.isdir(out) or out.endswith(os.sep) else out
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_design(args):
    cfg = _config(args)
    report = ex.run_experiment(cfg, jobs=args.jobs)
    report.write(cfg.output_dir)
    med = report.medians
    print(f"wrote {cfg.repetitions} repetitions to {cfg.output_dir}; final median error on "
          f"the mean {med['error_on_mean'][-1]}")
    return 0 if report.complete else EXIT_NUMERIC


def cmd_benchmark(args):
    cfg = _config(args)
    report = ex.method_comparison(cfg, jobs=args.jobs)
    report.write(cfg.output_dir, rep_columns=ex.BENCH_FIELDS)
    print(json.dumps(report.medians, sort_keys=True))


def cmd_timing(args):
    cfg = _config(args)
    report = ex.timing_study(cfg)
    report.write(cfg.output_dir)
    for row in report.timing:
        print(f"sigma={row['sigma']:g} {row['method']:>10}: m1 {row['median_rel_err_m1']:.3e} "
              f"m2 {row['median_rel_err_m2']:.3e} {row['seconds_per_query']:.3e} s/query")


def _common(p, experiment=True):
    p.add_argument("--out", help="output directory (or file for single-table commands)")
    p.add_argument("--seed", type=int, help="master seed")
    if experiment:
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("--preset", help=f"base configuration: {', '.join(sorted(ex.PRESETS))}")
        p.add_argument("--jobs", type=int, default=1, help="parallel repetitions")


def build_parser():
    parser = argparse.ArgumentParser(prog="nestedgp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a kriging model to a CSV table (last column = output)")
    p.add_argument("--data", required=True)
    p.add_argument("--kernel", default="gaussian", choices=["gaussian", "matern52"])
    p.add_argument("--degree", type=int, default=0, help="polynomial trend degree (1-D inputs)")
    _common(p, experiment=False)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a model written by `fit`")
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True)
    _common(p, experiment=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("lhs", help="maximin Latin hypercube design")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lower", required=True, help="comma-separated lower bounds")
    p.add_argument("--upper", required=True, help="comma-separated upper bounds")
    p.add_argument("--restarts", type=int, default=10)
    _common(p, experiment=False)
    p.set_defaults(func=cmd_lhs)

    for name, func, text in (("design", cmd_design, "sequential design study"),
                             ("benchmark", cmd_benchmark, "method comparison over design sizes"),
                             ("timing", cmd_timing, "moment-engine accuracy and timing")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (ex.ConfigError, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, (KrigingError, PhysicsError, linalg.LinAlgError)):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KrigingError, PhysicsError, linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
