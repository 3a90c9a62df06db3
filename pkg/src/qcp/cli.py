"""Command line front end: full-data fits, sparse interpolation, the
standard table sweeps and the scaling probe."""

import argparse
import json
import sys

from .als import AlsConfig
from .cpmodel import save_model
from .experiments import (
    FunctionSpec,
    fit_function,
    interp_function,
    run_table,
    scaling_probe,
    write_csv,
)


def parse_function(text):
    """Parse 'name' or 'name:param', e.g. gaussian:50 or sine:2."""
    name, _, param = text.partition(":")
    try:
        value = float(param) if param else 1.0
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad function parameter {param!r}")
    return name, value


def _add_fit_options(p, sparse):
    p.add_argument("--function", required=True, type=parse_function,
                   metavar="NAME[:PARAM]",
                   help="exp_decay, gaussian, sine or monomial, with parameter")
    p.add_argument("--interval", nargs=2, type=float, default=(0.0, 1.0),
                   metavar=("A", "B"))
    p.add_argument("-L", "--order", type=int, default=15 if not sparse else 12)
    p.add_argument("-r", "--rank", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--maxiter", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalized", action="store_true",
                   help="pin row 1 of modes 1..L-1 to ones")
    p.add_argument("--balance-columns", action="store_true",
                   help="rescale rank-1 terms after each sweep (free format)")
    p.add_argument("--out", help="write the result row as CSV")
    p.add_argument("--model-out", help="write the fitted model (text format)")
    if sparse:
        p.add_argument("-M", "--samples", type=int,
                       help="number of sampled entries (default 4*L*r)")
        p.add_argument("--strategy", default="uniform-random",
                       choices=("uniform-random", "stratified"))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qcp",
        description="Compress function samples on a 2**L grid into a rank-r "
                    "quantized canonical model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_fit_options(sub.add_parser(
        "fit", help="alternating least squares on the full sample vector"), False)
    _add_fit_options(sub.add_parser(
        "interp", help="sparse interpolation from M sampled entries"), True)

    p_table = sub.add_parser("table", help="run one of the standard sweeps")
    p_table.add_argument("table", type=int, choices=(1, 2, 3, 4))
    p_table.add_argument("--out", help="CSV output path (default table<N>.csv)")
    p_table.add_argument("--model-out", help="directory for JSON model dumps")
    p_table.add_argument("--restarts", type=int)
    p_table.add_argument("--maxiter", type=int)
    p_table.add_argument("--tol", type=float)
    p_table.add_argument("--seed", type=int)

    p_scale = sub.add_parser("scaling", help="sweep-cost scaling measurements")
    p_scale.add_argument("--levels", nargs="+", type=int, default=(14, 15, 16))
    p_scale.add_argument("-r", "--rank", type=int, default=8)
    p_scale.add_argument("--reps", type=int, default=21,
                         help="timed samples per level (medians are reported)")
    p_scale.add_argument("--out", help="write the report as JSON")
    return parser


def _config(args):
    return AlsConfig(
        rank=args.rank,
        tolerance=args.tol,
        max_iterations=args.maxiter,
        restarts=args.restarts,
        seed=args.seed,
        normalized=args.normalized,
        balance_columns=args.balance_columns,
    )


def _run_single(args, sparse):
    name, param = args.function
    spec = FunctionSpec(name, param, tuple(args.interval), args.order)
    cfg = _config(args)
    if sparse:
        m = args.samples if args.samples is not None else 4 * args.order * args.rank
        row, model, report = interp_function(
            spec, cfg, m, strategy=args.strategy, full_error=False)
        kind = "max sampled residual"
    else:
        row, model, report = fit_function(spec, cfg)
        kind = "max error"
    print(f"{row.function}  L={row.order}  r={row.rank}"
          + (f"  M={row.samples}" if sparse else "")
          + f"  {kind}={row.error:.6g}  iters={row.iterations}"
          + f"  seconds={row.seconds:.3f}")
    if report.solver_failed:
        print("warning: solver failed at the regularization cap; "
              "best iterate returned", file=sys.stderr)
    if args.out:
        write_csv([row], args.out)
    if args.model_out:
        save_model(model, args.model_out)
    return 1 if report.solver_failed else 0


def _run_table(args):
    overrides = {}
    if args.restarts is not None:
        overrides["restarts"] = args.restarts
    if args.maxiter is not None:
        overrides["max_iterations"] = args.maxiter
    if args.tol is not None:
        overrides["tolerance"] = args.tol
    if args.seed is not None:
        overrides["seed"] = args.seed
    out = args.out or f"table{args.table}.csv"
    rows = run_table(args.table, out=out, model_dir=args.model_out,
                     overrides=overrides)
    for row in rows:
        print(f"{row.function}  L={row.order}  r={row.rank}  M={row.samples}"
              f"  error={row.error:.6g}  iters={row.iterations}")
    print(f"wrote {out}")
    return 0


def _run_scaling(args):
    report = scaling_probe(levels=tuple(args.levels), rank=args.rank,
                           repetitions=args.reps)
    print(json.dumps(report, indent=2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "fit":
        return _run_single(args, sparse=False)
    if args.command == "interp":
        return _run_single(args, sparse=True)
    if args.command == "table":
        return _run_table(args)
    return _run_scaling(args)


if __name__ == "__main__":
    sys.exit(main())
