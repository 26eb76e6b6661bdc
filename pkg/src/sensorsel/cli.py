"""Command line interface.

Exit codes: 0 success, 1 validation error (bad flags, bad input), 2
numerical failure (rank deficiency, ill-conditioning, failed self-check).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, harness, verify
from .errors import NumericalError, ValidationError
from .objective import ObjectiveConfig
from .pod import PodBasis, compute_pod, truncation_error
from .reconstruction import estimation_error, reconstruct_snapshots
from .selection import METHODS, SensorSet

log = logging.getLogger("sensorsel")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _methods(text: str) -> tuple:
    return tuple(m.strip() for m in text.split(",") if m.strip())


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _out_format(path, flag):
    if flag:
        return flag
    return "json" if path is not None and str(path).lower().endswith(".json") else "csv"


def _add_matrix_input(p):
    p.add_argument("--input", required=True, help="matrix file (csv or rawf64)")
    p.add_argument("--format", choices=dataio.FORMATS, help="input format; guessed from the suffix if omitted")
    p.add_argument("--header", action="store_true", help="skip one header line in CSV input")


def _load_candidates(args) -> PodBasis:
    mat = dataio.load_matrix(args.input, args.format, header=args.header)
    if args.snapshots:
        return compute_pod(mat, args.modes, center=args.center)
    if args.modes > mat.m:
        raise ValidationError(f"--modes {args.modes} exceeds the {mat.m} columns of {args.input}")
    return PodBasis(mat.data[:, : args.modes], mask=mat.mask)


def cmd_pod(args):
    mat = dataio.load_matrix(args.input, args.format, header=args.header)
    basis = compute_pod(mat, args.modes, center=args.center)
    err = truncation_error(mat, basis)
    if args.out:
        dataio.save_basis(basis, args.out)
    print(f"n={basis.n_points} r={basis.r_modes} truncation_error={dataio.format_float(err)}")
    return 0


def cmd_select(args):
    basis = _load_candidates(args)
    cfg = ObjectiveConfig(args.epsilon)
    sel, dt = harness.timed_select(basis, args.sensors, args.method, args.seed)
    config = {
        "input": str(args.input), "modes": args.modes, "sensors": args.sensors,
        "seed": args.seed, "epsilon": args.epsilon, "snapshots": args.snapshots, "center": args.center,
    }
    report = harness.make_report(basis, sel, args.method, config, dt, cfg,
                                 timestamp="" if args.no_timestamp else None)
    if args.out:
        dataio.save_report(report, args.out, args.report_format)
    else:
        sys.stdout.write(dataio.report_to_json(report))
    return 0


def cmd_reconstruct(args):
    truth = dataio.load_matrix(args.input, args.format, header=args.header)
    basis = dataio.load_basis(args.basis, args.basis_format)
    if args.modes:
        basis = basis.truncate(args.modes)
    rep = dataio.load_report(args.sensors)
    sel = SensorSet(rep.indices, np.zeros(len(rep.indices)), rep.method)
    if truth.n != basis.n_points:
        raise ValidationError(f"input has {truth.n} rows, basis has {basis.n_points}")
    rec = reconstruct_snapshots(basis, sel, truth)
    err = estimation_error(truth, rec)
    if args.out:
        dataio.save_matrix(rec, args.out)
    print(f"p={sel.p} r={basis.r_modes} estimation_error={dataio.format_float(err)}")
    return 0


def _config(args, **extra) -> harness.ExperimentConfig:
    return harness.ExperimentConfig(
        n=args.n, r=args.r, p_range=harness.parse_range(args.p), trials=getattr(args, "trials", 1),
        seed=args.seed, methods=_methods(args.methods), **extra,
    )


def cmd_bench_random(args):
    cfg = _config(args, epsilon=args.epsilon)
    rows = harness.run_random_experiment(cfg)
    fmt = _out_format(args.out, args.out_format)
    _emit(dataio.write_table(rows, fmt=fmt), args.out)
    return 0


def cmd_bench_time(args):
    cfg = _config(args, reps=args.reps)
    rows = harness.run_timing(cfg)
    _emit(dataio.write_table(rows, fmt=_out_format(args.out, args.out_format)), args.out)
    return 0


def cmd_crossval(args):
    if args.input:
        data = dataio.load_matrix(args.input, args.format, header=args.header)
    else:
        data = harness.synthetic_snapshots(args.n, args.m, args.rank or args.r, args.noise, args.seed)
    cfg = _config(args, kfolds=args.kfolds, shuffle_folds=args.shuffle_folds, center=args.center)
    rows = harness.run_crossval(data, cfg)
    _emit(dataio.write_table(rows, fmt=_out_format(args.out, args.out_format)), args.out)
    return 0


def cmd_verify(args):
    checks = verify.run_all(quick=args.quick, seed=args.seed)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print("all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sensorsel", description="Greedy sparse sensor selection on POD bases.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pod", help="compute a truncated POD basis from snapshots")
    _add_matrix_input(p)
    p.add_argument("--modes", type=int, required=True, help="number of POD modes r")
    p.add_argument("--center", action="store_true", help="subtract the temporal mean before the SVD")
    p.add_argument("--out", help="write the basis (rawf64 plus .sv.csv sidecar)")
    p.set_defaults(func=cmd_pod)

    p = sub.add_parser("select", help="select sensors and write a selection report")
    _add_matrix_input(p)
    p.add_argument("--method", choices=METHODS, default="qd")
    p.add_argument("--modes", type=int, required=True, help="number of modes r (leading input columns)")
    p.add_argument("--sensors", type=int, required=True, help="number of sensors p")
    p.add_argument("--snapshots", action="store_true", help="input is snapshot data; compute the POD basis first")
    p.add_argument("--center", action="store_true", help="with --snapshots, center before the SVD")
    p.add_argument("--seed", type=int, default=0, help="seed for random and gappy-r")
    p.add_argument("--epsilon", type=float, default=1e-6, help="regularization of the unified objective")
    p.add_argument("--out", help="report path (.json or .csv); stdout JSON if omitted")
    p.add_argument("--report-format", choices=("json", "csv"))
    p.add_argument("--no-timestamp", action="store_true", help="leave the timestamp field empty")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("reconstruct", help="reconstruct snapshots from their values at selected sensors")
    _add_matrix_input(p)
    p.add_argument("--basis", required=True, help="basis file written by `pod --out` or a modes matrix")
    p.add_argument("--basis-format", choices=dataio.FORMATS)
    p.add_argument("--modes", type=int, help="use only the leading modes of the basis")
    p.add_argument("--sensors", required=True, help="selection report (JSON)")
    p.add_argument("--out", help="write the reconstructed matrix")
    p.set_defaults(func=cmd_reconstruct)

    def experiment_flags(p, p_default):
        p.add_argument("--n", type=int, default=2000, help="candidate points")
        p.add_argument("--r", type=int, default=10, help="modes")
        p.add_argument("--p", default=p_default, help="sensor counts: 'lo:hi[:step]' or comma list")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--methods", default=",".join(METHODS), help="comma-separated subset of " + ",".join(METHODS))
        p.add_argument("--out", help="output file; stdout if omitted")
        p.add_argument("--out-format", choices=("csv", "json"))

    p = sub.add_parser("bench-random", help="normalized determinants on random Gaussian candidate matrices")
    experiment_flags(p, "1:20")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.set_defaults(func=cmd_bench_random)

    p = sub.add_parser("bench-time", help="median selection wall time per method and p")
    experiment_flags(p, "1:20")
    p.add_argument("--reps", type=int, default=5)
    p.set_defaults(func=cmd_bench_time)

    p = sub.add_parser("crossval", help="K-fold estimation error (synthetic data unless --input)")
    p.add_argument("--input", help="snapshot matrix; synthetic low-rank data if omitted")
    p.add_argument("--format", choices=dataio.FORMATS)
    p.add_argument("--header", action="store_true")
    experiment_flags(p, "1:20")
    p.set_defaults(n=500, methods="qr,dg,qd,random,gappy-r")
    p.add_argument("--m", type=int, default=500, help="synthetic snapshots")
    p.add_argument("--rank", type=int, help="rank of the synthetic field (defaults to --r)")
    p.add_argument("--noise", type=float, default=0.01, help="synthetic noise level relative to the rms signal")
    p.add_argument("--kfolds", type=int, default=5)
    p.add_argument("--shuffle-folds", action="store_true", help="shuffle columns before splitting into folds")
    p.add_argument("--center", action="store_true")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("verify", help="run the invariant self-checks")
    p.add_argument("--quick", action="store_true", help="reduced trial counts")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"sensorsel: numerical error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, OSError) as exc:
        print(f"sensorsel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
