"""Command-line entry point.

Exit codes: 0 on success, 2 on validation errors (bad configs, malformed
input), 3 when a search budget or series cap is exhausted. ``NUM_THREADS``
caps parallelism.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys

import numpy as np

from . import rng
from .bounds import kl_mixture_bound, kl_mixture_exact
from .concentration import lemma1_report
from .errors import BudgetError, ValidationError
from .harness import CsvSink, SweepGrid, format_value, load_config, run_risk_experiment, run_sweep
from .lower_bounds import thm2_instance, thm3_instance, varshamov_gilbert_packing

log = logging.getLogger("sparse_poisson")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None


def _write_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def cmd_simulate(args):
    cfg = load_config(args.config, output_path=args.out)
    report = run_risk_experiment(cfg)
    with CsvSink(args.out) as sink:
        sink.write(report)
    for r in report.results:
        log.info("%-24s mse=%.6g se=%.3g", r.estimator.label, r.mse, r.se)


def cmd_sweep(args):
    cfg = load_config(args.config, output_path=args.out)
    grid = SweepGrid.from_dict(_read_json(args.grid))
    with CsvSink(args.out) as sink:
        run_sweep(grid, cfg, sink=sink)
    log.info("wrote %d cells to %s", grid.size, args.out)


def cmd_verify_lemma1(args):
    nu = np.full(args.p, args.nu)
    report = lemma1_report(nu, args.u, args.reps, args.seed)
    rows = [(r.u, r.in_range, r.emp_freq, r.ci_low, r.ci_high, r.bound, r.passed)
            for r in report.rows]
    _write_csv(args.out, ("u", "in_range", "emp_freq", "ci_low", "ci_high", "bound", "pass"), rows)
    for row in rows:
        print(" ".join(format_value(v) for v in row))
    failed = [r for r in report.rows if r.passed is False]
    if failed:
        log.warning("%d admissible u values exceed the analytic bound", len(failed))


def cmd_verify_kl(args):
    doc = _read_json(args.grid)
    as_list = lambda v: v if isinstance(v, list) else [v]
    try:
        axes = [as_list(doc[k]) for k in ("n", "s", "sigma", "mu0", "eps")]
    except KeyError as exc:
        raise ValidationError(f"KL grid lacks field {exc}") from None
    tol = float(doc.get("tol", 1e-12))
    rows = []
    for n, s, sigma, mu0, eps in itertools.product(*axes):
        exact = kl_mixture_exact(int(n), int(s), float(sigma), float(eps), float(mu0), tol=tol)
        bound = kl_mixture_bound(int(n), int(s), float(sigma), float(eps), float(mu0))
        rows.append((int(n), int(s), float(sigma), float(mu0), float(eps), exact, bound,
                     exact <= bound))
    _write_csv(args.out, ("n", "s", "sigma", "mu0", "eps", "kl_exact", "kl_bound", "pass"), rows)
    bad = sum(not r[-1] for r in rows)
    print(f"{len(rows)} grid points, {bad} violations")


def _print_checks(checks):
    width = max(len(k) for k in checks)
    print(f"{'condition':<{width}}  {'observed':>22}  {'limit':>22}  pass")
    for name, (observed, limit, ok) in checks.items():
        print(f"{name:<{width}}  {float(observed):>22.15g}  {float(limit):>22.15g}  "
              f"{'yes' if ok else 'NO'}")


def cmd_lower_bound(args):
    doc = _read_json(args.config)
    try:
        if args.mode == "thm2":
            mu0 = doc.get("mu0_max", doc.get("mu0"))
            mu0_max = float(np.max(mu0))
            inst = thm2_instance(int(doc["n"]), int(doc["s"]), float(doc["sigma"]), mu0_max,
                                 p=int(doc.get("p", 1)), tol=float(doc.get("tol", 1e-12)))
        else:
            p = int(doc["p"])
            mu0 = doc["mu0"]
            mu0 = np.full(p, float(mu0)) if np.isscalar(mu0) else np.asarray(mu0, dtype=float)
            inst = thm3_instance(int(doc["n"]), p, int(doc["s"]), float(doc["sigma"]), mu0,
                                 float(doc["mu_inf"]), int(doc.get("seed", 0)))
    except KeyError as exc:
        raise ValidationError(f"lower-bound config lacks field {exc}") from None
    _print_checks(inst.checks())
    _write_json(inst.to_dict(), args.out)


def cmd_packing(args):
    code = varshamov_gilbert_packing(args.p, args.seed)
    print(f"p={code.p} m={code.m} sets={len(code.subsets)} "
          f"min|Ti^Tj|={code.min_sym_diff} required={code.required_diff}")
    _write_json(code.to_dict(), args.out)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparse-poisson",
        description="Estimate linear functionals of sparse scaled-Poisson intensities.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo risk of the configured estimators")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="risk experiments over a parameter grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-lemma1", help="empirical Poisson tail vs the analytic bound")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--u", type=float, nargs="+", default=[40.0, 60.0, 80.0])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify_lemma1)

    p = sub.add_parser("verify-kl", help="exact mixture KL vs its closed-form bound")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify_kl)

    p = sub.add_parser("lower-bound", help="build a lower-bound instance and check its conditions")
    p.add_argument("--mode", choices=("thm2", "thm3"), required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lower_bound)

    p = sub.add_parser("packing", help="random greedy Varshamov-Gilbert packing")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_packing)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    rng.configure_threads()
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
