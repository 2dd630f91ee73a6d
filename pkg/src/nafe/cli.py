"""Command-line front door.

Subcommands: ``estimate`` (fit estimators on a CSV panel), ``simulate``
(preset or custom Monte Carlo grids), ``bootstrap`` (resampled standard
errors), and ``probe`` (theory checks).  Every run prints its resolved
seed, writes one CSV to --out plus a sibling <out>.meta.json manifest,
and exits 0 on success, 1 on usage errors, 2 on data errors, and 3 on
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .bootstrap import bootstrap_replicates, bootstrap_se, iqr_se
from .demo import make_demo_panel
from .dgp import BASELINE, MULTIPLICATIVE, RANK_MIXTURE, DgpSpec
from .errors import NumericalError, PanelDataError
from .estimators import beta_at, canay_feqr, coefficient_path, fit_all_units, within_fe
from .mc import (
    MEAN_RULE,
    McConfig,
    identification_probe,
    permutation_recovery_probe,
    rate_to_T,
    run_mc,
    spacing_bound_probe,
)
from .panel import column_means, load_csv, validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

DEFAULT_BUDGET = 500_000_000  # max n*T*reps per simulate cell


class UsageError(ValueError):
    """Invalid flag values detected after parsing."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; this CLI reserves 2 for
    # data errors, so remap parser failures to the usage exit code.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_taus(text: str) -> list[float]:
    try:
        taus = [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"cannot parse --tau {text!r}: {exc}") from exc
    if not taus:
        raise UsageError("--tau list is empty")
    bad = [t for t in taus if not 0.0 < t < 1.0]
    if bad:
        raise UsageError(f"tau value(s) {bad} outside the open interval (0, 1)")
    return taus


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"cannot parse {flag} {text!r}: {exc}") from exc


def _parse_ints(text: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"cannot parse {flag} {text!r}: {exc}") from exc


def _load_panel(data: str):
    if data == "demo":
        return make_demo_panel()
    return load_csv(data)


def _resolve_x_star(text: str, d):
    if text == MEAN_RULE:
        return column_means(d)
    vec = np.asarray(_parse_floats(text, "--x-star"), dtype=np.float64)
    if vec.shape != (d.K,):
        raise UsageError(
            f"--x-star has {vec.size} entries, panel has K={d.K} regressors "
            f"({d.regressor_names}); pass the full vector including the intercept entry"
        )
    return vec


def _write_manifest(out: str, command: str, seed: int, resolved: dict, wall_time: float):
    manifest = {
        "version": __version__,
        "command": command,
        "seed": seed,
        "resolved": resolved,
        "wall_time_s": wall_time,
    }
    with open(str(out) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")


def _write_cells(out: str, cells, seed: int) -> None:
    from .mc import McResult

    McResult(cells=list(cells), reps=0, seed=seed, wall_time_s=0.0).to_csv(out)


# ---------------------------------------------------------------- estimate


def cmd_estimate(args) -> int:
    t0 = time.perf_counter()
    seed = args.seed
    print(f"seed: {seed}")
    taus = _parse_taus(args.tau)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    unknown = [m for m in methods if m not in ("nafe", "feqr", "fe")]
    if unknown:
        raise UsageError(f"unknown method(s) {unknown}; choose from nafe,feqr,fe")
    if args.se is not None and args.se != "bootstrap":
        raise UsageError(f"unsupported --se {args.se!r}; only 'bootstrap' is available")

    d = _load_panel(args.data)
    report = validate(d)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_DATA
    x_star = _resolve_x_star(args.x_star, d)

    rows = []  # (method, tau or None, coefficient, estimate, se or None)
    slope_names = d.regressor_names[1:] if d.has_intercept_column else d.regressor_names
    if "nafe" in methods:
        path = coefficient_path(fit_all_units(d), x_star)
        se = None
        if args.se == "bootstrap":
            se = bootstrap_se(d, taus, x_star, args.B, seed, threads=args.threads).se
        for j, tau in enumerate(taus):
            b = beta_at(path, tau)
            for k, name in enumerate(d.regressor_names):
                rows.append((
                    "nafe", tau, name, float(b[k]),
                    None if se is None else float(se[j, k]),
                ))
    if "feqr" in methods:
        est = np.array([canay_feqr(d, tau) for tau in taus])
        se = None
        if args.se == "bootstrap":
            reps, _ = bootstrap_replicates(
                d,
                lambda dd: np.array([canay_feqr(dd, tau) for tau in taus]),
                args.B,
                seed,
                threads=args.threads,
            )
            se = iqr_se(reps)
        for j, tau in enumerate(taus):
            for k, name in enumerate(slope_names):
                rows.append((
                    "feqr", tau, name, float(est[j, k]),
                    None if se is None else float(se[j, k]),
                ))
    if "fe" in methods:
        fit = within_fe(d)
        se = None
        if args.se == "bootstrap":
            reps, _ = bootstrap_replicates(
                d, lambda dd: within_fe(dd).beta_fe, args.B, seed, threads=args.threads
            )
            se = iqr_se(reps)
        for k, name in enumerate(slope_names):
            rows.append((
                "fe", None, name, float(fit.beta_fe[k]),
                None if se is None else float(se[k]),
            ))

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("method,tau,coefficient,estimate,se\n")
        for method, tau, name, est, se_v in rows:
            tau_s = "" if tau is None else repr(float(tau))
            se_s = "" if se_v is None else repr(se_v)
            fh.write(f"{method},{tau_s},{name},{est!r},{se_s}\n")
    _write_manifest(
        args.out,
        "estimate",
        seed,
        {
            "data": args.data,
            "taus": taus,
            "methods": methods,
            "x_star": [float(v) for v in x_star],
            "se": args.se,
            "B": args.B if args.se == "bootstrap" else None,
            "n": d.n,
            "T": d.T,
        },
        time.perf_counter() - t0,
    )
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def _preset_configs(args) -> tuple[list[McConfig], dict]:
    taus = (0.25, 0.5, 0.75)
    reps, seed = args.reps, args.seed
    if args.table == "t1":
        grid, skipped = [], []
        for n in (100, 200, 500, 1000, 2000, 5000, 10000):
            for rate in (0.25, 0.5, 0.75, 1.0):
                T = rate_to_T(n, rate)
                spec = DgpSpec(BASELINE, n, T, rho=1.0, sigma_v=1.0, shift=4.0)
                if n * T * reps > args.budget:
                    skipped.append({"n": n, "T": T, "rate": rate})
                else:
                    grid.append(spec)
        if not grid:
            raise UsageError("cell budget excludes the entire t1 grid; raise --budget")
        cfgs = [McConfig(spec_grid=tuple(grid), estimators=("nafe",), taus=taus,
                         x_star_rule=(1.0, 4.5), reps=reps, seed=seed)]
        return cfgs, {"table": "t1", "skipped_cells": skipped}
    if args.table == "t2":
        specs = tuple(
            DgpSpec(BASELINE, 100, 100, rho=rho, sigma_v=0.1, shift=4.0) for rho in (0.0, 1.0)
        )
        cfgs = [
            McConfig(spec_grid=specs, estimators=("nafe",), taus=taus,
                     x_star_rule=(1.0, x1), reps=reps, seed=seed)
            for x1 in (2.5, 3.5, 4.5, 5.5, 6.5)
        ]
        return cfgs, {"table": "t2"}
    if args.table == "t3":
        specs = tuple(
            DgpSpec(RANK_MIXTURE, 100, 100, rho=rho, sigma_v=sv, shift=4.0)
            for sv in (0.01, 0.1, 1.0)
            for rho in (0.0, 1.0, 3.0, 10.0)
        )
        cfgs = [McConfig(spec_grid=specs, estimators=("nafe", "feqr"), taus=taus,
                         x_star_rule=(1.0, 4.0), reps=reps, seed=seed)]
        return cfgs, {"table": "t3"}
    if args.table == "t8":
        specs = tuple(
            DgpSpec(MULTIPLICATIVE, 100, 100, rho=rho, sigma_v=0.1, shift=4.0)
            for rho in (0.0, 1.0, 3.0, 10.0)
        )
        cfgs = [
            McConfig(spec_grid=specs, estimators=("nafe", "fe"), taus=taus,
                     x_star_rule=(1.0, x1), reps=reps, seed=seed)
            for x1 in (5.0, 6.0, 7.0, 8.0)
        ]
        return cfgs, {"table": "t8"}
    # custom grid
    if args.family is None or args.n is None or args.T is None:
        raise UsageError("--table custom requires --family, --n, and --T")
    taus = tuple(_parse_taus(args.tau))
    estimators = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    specs = tuple(
        DgpSpec(args.family, n, T, rho=rho, sigma_v=sv, shift=args.shift)
        for n in _parse_ints(args.n, "--n")
        for T in _parse_ints(args.T, "--T")
        for rho in _parse_floats(args.rho, "--rho")
        for sv in _parse_floats(args.sigma_v, "--sigma-v")
    )
    rule = MEAN_RULE if args.x_star == MEAN_RULE else tuple(_parse_floats(args.x_star, "--x-star"))
    try:
        cfgs = [McConfig(spec_grid=specs, estimators=estimators, taus=taus,
                         x_star_rule=rule, reps=reps, seed=seed)]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfgs, {"table": "custom"}


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    print(f"seed: {args.seed}")
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    try:
        configs, grid_info = _preset_configs(args)
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(str(exc)) from exc

    cells = []
    for cfg in configs:
        cells.extend(run_mc(cfg, threads=args.threads).cells)
    _write_cells(args.out, cells, args.seed)
    resolved = dict(grid_info)
    resolved.update(
        {
            "reps": args.reps,
            "threads_requested": args.threads,
            "budget": args.budget,
            "configs": [
                {
                    "specs": [vars(s) for s in cfg.spec_grid],
                    "estimators": list(cfg.estimators),
                    "taus": list(cfg.taus),
                    "x_star_rule": cfg.x_star_rule,
                }
                for cfg in configs
            ],
        }
    )
    _write_manifest(args.out, "simulate", args.seed, resolved, time.perf_counter() - t0)
    print(f"wrote {len(cells)} cells to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- bootstrap


def cmd_bootstrap(args) -> int:
    t0 = time.perf_counter()
    print(f"seed: {args.seed}")
    if args.B < 2:
        raise UsageError("--B must be >= 2")
    taus = _parse_taus(args.tau)
    d = _load_panel(args.data)
    report = validate(d)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_DATA
    x_star = _resolve_x_star(args.x_star, d)
    result = bootstrap_se(d, taus, x_star, args.B, args.seed, threads=args.threads)
    result.to_csv(args.out, coefficient_names=d.regressor_names)
    _write_manifest(
        args.out,
        "bootstrap",
        args.seed,
        {
            "data": args.data,
            "taus": taus,
            "B": args.B,
            "x_star": [float(v) for v in x_star],
            "failed_replicates": result.failed_replicates,
        },
        time.perf_counter() - t0,
    )
    print(f"wrote bootstrap SEs to {args.out} ({result.failed_replicates} failed replicates)")
    return EXIT_OK


# ---------------------------------------------------------------- probe


def cmd_probe(args) -> int:
    t0 = time.perf_counter()
    print(f"seed: {args.seed}")
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    n_list = _parse_ints(args.n, "--n")
    if not n_list or any(n < 1 for n in n_list):
        raise UsageError(f"--n {args.n!r} must list positive integers")
    resolved: dict = {"which": args.which, "reps": args.reps}

    if args.which == "identification":
        taus = _parse_taus(args.tau)
        spec = DgpSpec(BASELINE, n=n_list[0], T=2, shift=args.shift)
        pairs = identification_probe(
            n_list[0], taus, spec, args.seed, x_star=(1.0, args.x1_star)
        )
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("tau,p_hat,abs_err,n,seed\n")
            for tau, p_hat in pairs:
                fh.write(f"{tau!r},{p_hat!r},{abs(p_hat - tau)!r},{n_list[0]},{args.seed}\n")
        for tau, p_hat in pairs:
            print(f"identification tau={tau:g}: |p_hat - tau| = {abs(p_hat - tau):.6f}")
        resolved.update({"n": n_list[0], "taus": taus, "x1_star": args.x1_star})

    elif args.which == "permutation":
        rates = _parse_floats(args.rate, "--rate")
        specs = [
            DgpSpec(BASELINE, n, rate_to_T(n, rate), rho=args.rho, sigma_v=args.sigma_v,
                    shift=args.shift)
            for n in n_list
            for rate in rates
        ]
        out = permutation_recovery_probe(
            specs, args.reps, args.seed, x_star=(1.0, args.x1_star)
        )
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("family,n,T,rho,sigma_v,recovery_freq,reps,seed\n")
            for spec, freq in out:
                fh.write(
                    f"{spec.family},{spec.n},{spec.T},{spec.rho!r},{spec.sigma_v!r},"
                    f"{freq!r},{args.reps},{args.seed}\n"
                )
        for spec, freq in out:
            print(f"permutation recovery n={spec.n} T={spec.T}: {freq:.4f}")
        resolved.update({"n": n_list, "rates": rates, "rho": args.rho,
                         "sigma_v": args.sigma_v})

    elif args.which == "spacing":
        rows = []
        for n in n_list:
            grid = np.linspace(0.0, 1.0 / (n + 1), args.points)
            for x, emp, bound in spacing_bound_probe(
                n, grid, args.reps, args.seed, x1_star=args.x1_star
            ):
                rows.append((n, x, emp, bound))
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("n,x,empirical,bound,within_bound,reps,seed\n")
            for n, x, emp, bound in rows:
                fh.write(
                    f"{n},{x!r},{emp!r},{bound!r},{str(emp <= bound).lower()},"
                    f"{args.reps},{args.seed}\n"
                )
        for n, x, emp, bound in rows:
            print(f"spacing n={n} x={x:.3e}: empirical={emp:.5f} bound={bound:.5f}")
        resolved.update({"n": n_list, "points": args.points, "x1_star": args.x1_star})

    _write_manifest(args.out, "probe", args.seed, resolved, time.perf_counter() - t0)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nafe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("estimate", help="fit estimators on a CSV panel",
                        description="Fit nafe/feqr/fe on a long-format CSV panel.")
    pe.add_argument("--data", required=True,
                    help="path to a long CSV (unit,time,y,x1,...) or 'demo'")
    pe.add_argument("--tau", default="0.25,0.5,0.75", help="comma list of ranks in (0,1)")
    pe.add_argument("--x-star", default=MEAN_RULE, dest="x_star",
                    help="'mean' or a comma K-vector (intercept entry included)")
    pe.add_argument("--method", default="nafe", help="comma subset of nafe,feqr,fe")
    pe.add_argument("--se", default=None, help="'bootstrap' to attach standard errors")
    pe.add_argument("--B", type=int, default=200, help="bootstrap replicates for --se")
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    pe.add_argument("--out", required=True)
    pe.set_defaults(fn=cmd_estimate)

    ps = sub.add_parser("simulate", help="run a Monte Carlo table preset or custom grid",
                        description="Replicated bias/MSE grids; presets t1,t2,t3,t8.")
    ps.add_argument("--table", default="custom", choices=["t1", "t2", "t3", "t8", "custom"])
    ps.add_argument("--reps", type=int, default=500)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ps.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                    help="skip preset cells with n*T*reps above this")
    ps.add_argument("--family", default=None,
                    choices=[BASELINE, RANK_MIXTURE, MULTIPLICATIVE])
    ps.add_argument("--n", default=None, help="comma list (custom grid)")
    ps.add_argument("--T", default=None, help="comma list (custom grid)")
    ps.add_argument("--rho", default="0", help="comma list (custom grid)")
    ps.add_argument("--sigma-v", default="1", dest="sigma_v", help="comma list (custom grid)")
    ps.add_argument("--shift", type=float, default=4.0)
    ps.add_argument("--x-star", default=MEAN_RULE, dest="x_star")
    ps.add_argument("--tau", default="0.25,0.5,0.75")
    ps.add_argument("--estimators", default="nafe")
    ps.add_argument("--out", required=True)
    ps.set_defaults(fn=cmd_simulate)

    pb = sub.add_parser("bootstrap", help="bootstrap standard errors on a CSV panel",
                        description="Unit-block bootstrap SEs of the rank-sorted estimator.")
    pb.add_argument("--data", required=True)
    pb.add_argument("--tau", default="0.25,0.5,0.75")
    pb.add_argument("--x-star", default=MEAN_RULE, dest="x_star")
    pb.add_argument("--B", type=int, default=200)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    pb.add_argument("--out", required=True)
    pb.set_defaults(fn=cmd_bootstrap)

    pp = sub.add_parser("probe", help="run a theory probe",
                        description="identification / permutation / spacing checks.")
    pp.add_argument("--which", required=True,
                    choices=["identification", "permutation", "spacing"])
    pp.add_argument("--n", default="10000", help="comma list of cross-section sizes")
    pp.add_argument("--tau", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    pp.add_argument("--rate", default="0.25", help="comma list of T growth rates")
    pp.add_argument("--rho", type=float, default=1.0)
    pp.add_argument("--sigma-v", type=float, default=1.0, dest="sigma_v")
    pp.add_argument("--shift", type=float, default=4.0)
    pp.add_argument("--x1-star", type=float, default=4.5, dest="x1_star")
    pp.add_argument("--reps", type=int, default=1000)
    pp.add_argument("--points", type=int, default=10)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--out", required=True)
    pp.set_defaults(fn=cmd_probe)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PanelDataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
