"""Command-line front end: ``isggm simulate | estimate | test | study``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .clime import cross_validate_lambda, write_cv_table
from .data_model import MultiSubjectDataset, load_dataset, simulate, standardize, write_dataset
from .debias_boot import EdgeSelector, bootstrap_draws, draw_multipliers, write_samples
from .errors import DataError, IsggmError
from .graph_props import PROPERTY_GRAMMAR, parse_property, write_edges
from .kernel_cov import KernelSpec, check_support_rule, default_grid, lambda_rate
from .seeding import derive_seed
from .stepdown import (
    TestConfig,
    calibration_study,
    fit_field,
    rate_study,
    roc_auc,
    roc_study,
    stderr_progress,
    stepdown_test,
    test_max_degree,
)

log = logging.getLogger("isggm")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be a positive integer")
    return v


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a comma-separated list of integers") from None
    if not vals or min(vals) < 2:
        raise argparse.ArgumentTypeError("sample sizes must be >= 2")
    return vals


def _add_shared(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=50, help="number of evenly spaced grid points")
    p.add_argument("--h", type=float, default=None, help="bandwidth (default h_const * n^-1/5)")
    p.add_argument("--h-const", type=float, default=1.2)
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=float, default=None, help="fixed CLIME lambda")
    lam.add_argument("--cv", action="store_true", help="choose lambda by L-fold cross-validation")
    p.add_argument("--lambda-const", type=float, default=0.9,
                   help="lambda = C * (h^2 + sqrt(log(d/h)/(nh))) when neither --lambda nor --cv")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bootstrap", type=_positive_int, default=500, help="bootstrap draws B")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--config", type=Path, default=None, help="key=value file, overridden by flags")


def build_parser():
    parser = argparse.ArgumentParser(prog="isggm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a paired dataset and its true graphs")
    _add_shared(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="hub degree parameter")
    p.add_argument("--null", action="store_true", help="keep max degree <= k")
    p.add_argument("--nuisance-scale", type=float, default=1.0)

    p = sub.add_parser("estimate", help="estimate precision matrices on a time grid")
    _add_shared(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--within", action="store_true", help="within-subject baseline (uses x only)")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--layout", choices=("auto", "paired", "multi"), default="auto")

    p = sub.add_parser("test", help="test a monotone property of the dynamic graph")
    _add_shared(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--property", required=True, help="one of: " + ", ".join(PROPERTY_GRAMMAR))
    p.add_argument("--critical", choices=("exact", "all_pairs"), default="exact")
    p.add_argument("--stepdown", action="store_true",
                   help="use the iterative step-down test for max-degree too")
    p.add_argument("--dump-bootstrap", action="store_true")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--layout", choices=("auto", "paired", "multi"), default="auto")

    p = sub.add_parser("study", help="Monte-Carlo calibration, ROC or rate studies")
    _add_shared(p)
    p.add_argument("--study", choices=("calibration", "roc", "rate"), required=True)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n", type=_int_list, default=[400, 1000])
    p.add_argument("--reps", type=_positive_int, default=200)
    p.add_argument("--nuisance-scale", type=float, default=None,
                   help="default 0.1 for calibration, 1.0 for roc and rate")
    p.add_argument("--resume", action="store_true", help="skip replications already checkpointed")
    return parser


def _read_config(path):
    out = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        if not args.config.is_file():
            raise UsageError(f"config file {args.config} not found")
        conf = _read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, val in conf.items():
            if key not in known:
                raise UsageError(f"unknown config key '{key}'")
            act = known[key]
            if act.nargs == 0:
                defaults[key] = val.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = act.type(val) if act.type else val
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _validate(args):
    if args.grid < 2:
        raise UsageError("--grid must be >= 2")
    if args.h is not None and not args.h > 0:
        raise UsageError("--h must be positive")
    if not args.h_const > 0:
        raise UsageError("--h-const must be positive")
    if args.lam is not None and args.lam < 0:
        raise UsageError("--lambda must be nonnegative")
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    if args.command == "simulate":
        if args.n < 2:
            raise UsageError("--n must be >= 2")
        if args.nuisance_scale < 0:
            raise UsageError("--nuisance-scale must be nonnegative")
    if args.command in ("estimate", "test"):
        if not args.data.is_file():
            raise UsageError(f"--data {args.data} is not a readable file")
    if args.command == "test":
        try:
            args.prop = parse_property(args.property)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.command == "study" and args.nuisance_scale is not None and args.nuisance_scale < 0:
        raise UsageError("--nuisance-scale must be nonnegative")


def _test_config(args, lam=None):
    return TestConfig(
        alpha=args.alpha,
        B=args.bootstrap,
        grid_size=args.grid,
        h=args.h,
        h_const=args.h_const,
        lam=lam if lam is not None else args.lam,
        lam_const=args.lambda_const,
        seed=args.seed,
    )


def _load(args):
    ds = load_dataset(args.data, args.layout)
    if isinstance(ds, MultiSubjectDataset):
        # split subjects into two groups and average, as for group designs
        half = ds.n_subjects // 2
        ds = ds.group_average((range(half), range(half, ds.n_subjects)))
    if args.standardize:
        ds = standardize(ds)
    if ds.n < 2:
        raise DataError("need at least 2 observations")
    return ds


def _resolve_lambda(args, ds, out):
    cfg = _test_config(args)
    if not args.cv:
        return cfg
    h = cfg.bandwidth(ds.n)
    rate = lambda_rate(ds.n, ds.d, h)
    consts = np.round(np.arange(0.5, 2.01, 0.1), 10)
    grid = default_grid(ds.z, min(args.grid, 20))
    res = cross_validate_lambda(ds, KernelSpec(h), consts * rate, folds=args.folds, grid=grid,
                                seed=derive_seed(args.seed, "cv"), config=cfg.clime_config(ds.n, ds.d))
    write_cv_table(res, out / "cv_table.csv")
    log.info("cross-validated lambda %.4g (constant %.2f)", res.lambda_star, res.lambda_star / rate)
    return replace(cfg, lam=res.lambda_star)


def _write_matrix(path, m):
    np.savetxt(path, m, delimiter=",", fmt="%.17g")


def cmd_simulate(args):
    path, _, _, ds = simulate(args.d, args.n, args.k, not args.null, args.nuisance_scale, args.seed)
    out = args.out
    (out / "truth").mkdir(parents=True, exist_ok=True)
    write_dataset(ds, out / "data.csv")
    grid = default_grid(ds.z, args.grid)
    with open(out / "truth" / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "z", "file"])
        for g, z in enumerate(grid):
            name = f"grid_{g:03d}.edges"
            write_edges(path.true_edges(z), out / "truth" / name)
            w.writerow([g, repr(float(z)), name])
    return 0


def cmd_estimate(args):
    ds = _load(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    cfg = _resolve_lambda(args, ds, out)
    fld = fit_field(ds, cfg, within=args.within)
    worst, ok = check_support_rule(ds.z, fld.grid, fld.h)
    if not ok:
        log.warning("only %.0f%% of time points have positive weight at some grid point (rule: 30%%)", 100 * worst)
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "z", "kernel_mass", "support_fraction", "theta_hat", "theta_de"])
        for g, z in enumerate(fld.grid):
            a, b = f"theta_hat_{g:03d}.csv", f"theta_de_{g:03d}.csv"
            _write_matrix(out / a, fld.theta_sym[g])
            _write_matrix(out / b, fld.theta_de[g])
            w.writerow([g, repr(float(z)), repr(float(fld.kernel_mass[g])),
                        repr(float(fld.support_fraction[g])), a, b])
    meta = {"n": ds.n, "d": ds.d, "h": fld.h, "lambda": fld.lam, "grid": int(fld.grid.size),
            "within": bool(args.within), "min_support_fraction": worst}
    (out / "estimate.json").write_text(json.dumps(meta, indent=2) + "\n")
    return 0


def cmd_test(args):
    ds = _load(args)
    out = args.out
    (out / "rejected").mkdir(parents=True, exist_ok=True)
    cfg = _resolve_lambda(args, ds, out)
    fld = fit_field(ds, cfg)
    p = args.prop
    if p.kind == "max_degree_greater" and not args.stepdown:
        res = test_max_degree(ds, p.k, cfg, fld)
        method = "single-step max-degree"
    else:
        res = stepdown_test(ds, p, cfg, fld, critical=args.critical)
        method = f"step-down ({args.critical} critical sets)"
    for g, es in enumerate(res.rejected_edges):
        write_edges(es, out / "rejected" / f"grid_{g:03d}.edges")
    if args.dump_bootstrap:
        xi = draw_multipliers(cfg.B, ds.n, derive_seed(cfg.seed, "bootstrap"))
        write_samples(bootstrap_draws(ds, fld, EdgeSelector.all_pairs(), xi=xi), out / "bootstrap.txt")
    report = {
        "property": str(p),
        "method": method,
        "reject": bool(res.reject),
        "psi": res.psi,
        "d_rej": res.d_rej,
        "iterations": res.iterations,
        "quantiles": [{"iteration": t, "edges": s, "c": c} for t, s, c in res.quantile_trace],
        "alpha": cfg.alpha,
        "B": cfg.B,
        "h": fld.h,
        "lambda": fld.lam,
        "n": ds.n,
        "d": ds.d,
        "grid": [float(z) for z in fld.grid],
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    c_first = res.quantile_trace[0][2] if res.quantile_trace else float("nan")
    lines = [
        f"property: {p}",
        f"method: {method}",
        f"decision: {'REJECT' if res.reject else 'ACCEPT'} the null at alpha={cfg.alpha}",
        f"d_rej: {res.d_rej}",
        f"psi: {res.psi}",
        f"c(1-alpha, E): {c_first:.6g}",
        f"iterations: {res.iterations}",
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _write_rows(path, rows, cols):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] for c in cols])


def cmd_study(args):
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    progress = stderr_progress(args.study)
    if args.study == "calibration":
        ns = 0.1 if args.nuisance_scale is None else args.nuisance_scale
        ckpt = out / "calibration.jsonl"
        if ckpt.exists() and not args.resume:
            ckpt.unlink()
        cfg = _test_config(args)
        rows = calibration_study(args.d, args.k, args.n, args.reps, cfg, nuisance_scale=ns, seed=args.seed,
                                 n_jobs=args.jobs, checkpoint=ckpt, progress=progress)
        _write_rows(out / "calibration.csv", rows, ["n", "type_I", "power", "lambda"])
    elif args.study == "roc":
        ns = 1.0 if args.nuisance_scale is None else args.nuisance_scale
        n = args.n[0]
        rows = roc_study(args.d, n, args.k, reps=args.reps, seed=args.seed, nuisance_scale=ns,
                         h_const=args.h_const, progress=progress)
        _write_rows(out / "roc.csv", rows, ["method", "z", "lambda", "tpr", "fpr"])
        aucs = [{"method": m, "z": z, "auc": a} for (m, z), a in roc_auc(rows).items()]
        _write_rows(out / "auc.csv", aucs, ["method", "z", "auc"])
    else:
        ns = 1.0 if args.nuisance_scale is None else args.nuisance_scale
        errs = rate_study(args.d, args.n, args.reps, args.seed, args.h_const, args.grid, ns)
        _write_rows(out / "rate.csv", [{"n": n, "error": e} for n, e in errs.items()], ["n", "error"])
    return 0


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "test": cmd_test, "study": cmd_study}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        _validate(args)
    except UsageError as exc:
        print(f"isggm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"isggm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IsggmError as exc:
        print(f"isggm: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", EXIT_NUMERIC)
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"isggm: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
