"""Command line interface: ``python3 -m onesided <verb> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import simulate as sim
from .fredholm import LabelSet, joint_cdf_airy1, joint_cdf_finite, joint_cdf_flat
from .kernels import KernelPoint, eval_airy1_kernel, eval_finite_kernel, eval_flat_kernel
from .lambert import ContourSpec, validate_contour


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _write_rows(out, header, rows):
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    path = Path(out)
    if path.suffix != ".csv":
        path.mkdir(parents=True, exist_ok=True)
        path = path / "output.csv"
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}", file=sys.stderr)


def _n_nodes(args) -> int:
    return max(8, int(round(24 * args.resolution)))


def cmd_simulate(args) -> int:
    labels = _ints(args.labels)
    if args.init == "flat":
        x = sim.sample_flat(args.t, labels, args.n_rep, args.seed, dt=args.dt, bridge=not args.grid)
    else:
        N = args.N or max(labels)
        x = sim.sample_finite(N, args.t, labels, args.n_rep, args.seed, init=args.init, dt=args.dt,
                              bridge=not args.grid)
    rows = [[i, *map(repr, row)] for i, row in enumerate(x.tolist())]
    _write_rows(args.out, ["replicate", *[f"x_{k}" for k in labels]], rows)
    return 0


def cmd_kernel(args) -> int:
    n1, n2 = args.labels_pair
    xs1, xs2 = _floats(args.x1), _floats(args.x2)
    rows = []
    for x1 in xs1:
        for x2 in xs2:
            if args.kind == "finite":
                v = eval_finite_kernel(KernelPoint(x1, n1), KernelPoint(x2, n2), args.t)
            elif args.kind == "flat":
                v = eval_flat_kernel(KernelPoint(x1, n1), KernelPoint(x2, n2), args.t)
            else:
                v = eval_airy1_kernel(x1, n1, x2, n2)
            rows.append([args.kind, args.t, n1, x1, n2, x2, repr(v)])
    _write_rows(args.out, ["kind", "t", "n1", "x1", "n2", "x2", "value"], rows)
    return 0


def cmd_fredholm(args) -> int:
    a = _floats(args.thresholds)
    n = _n_nodes(args)
    if args.kind == "airy1":
        r = _floats(args.labels)
        res = joint_cdf_airy1(list(zip(r, a)), n_nodes=n, tol=args.tol)
        lab = r
    else:
        lab = _ints(args.labels)
        fn = joint_cdf_flat if args.kind == "flat" else joint_cdf_finite
        res = fn(args.t, LabelSet.of(lab, a), n_nodes=n, tol=args.tol)
    rows = [[args.kind, args.t, ";".join(map(str, lab)), ";".join(map(str, a)), repr(res.value),
             json.dumps(res.resolution_trace)]]
    _write_rows(args.out, ["kind", "t", "labels", "thresholds", "value", "trace"], rows)
    return 0


def cmd_experiment(args) -> int:
    if args.config:
        cfg = ex.load_config(args.config)
        if args.id and args.id != cfg.experiment:
            print(f"config is for {cfg.experiment!r}, not {args.id!r}", file=sys.stderr)
            return 2
    elif args.id:
        cfg = ex.default_config(args.id)
    else:
        print("give an experiment id or --config", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.resolution != 1.0:
        cfg = cfg.replace(n_nodes=_n_nodes(args))
    report = ex.run_experiment(cfg)
    csv_path, man_path = ex.emit_report(report, cfg)
    print(f"wrote {csv_path} and {man_path}")
    for name, good in report.checks.items():
        print(f"{'pass' if good else 'FAIL'}  {name}")
    return 0 if report.ok else 1


def cmd_validate(args) -> int:
    specs = [ContourSpec.gamma(r) for r in _floats(args.rho)]
    specs += [ContourSpec.wedge(-2.5, np.pi / 2 + 0.1), ContourSpec.wedge(-2.0, 2 * np.pi / 3),
              ContourSpec.wedge(-1.05, 3 * np.pi / 4 - 0.05)]
    ok = True
    for spec in specs:
        rep = validate_contour(spec)
        print(rep.summary())
        ok &= rep.ok
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (key = <json> lines)")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out", default=None, help="output directory or .csv file")
    common.add_argument("--threads", type=int, default=None, help="worker threads for simulation")
    common.add_argument("--resolution", type=float, default=1.0,
                        help="quadrature resolution factor (24 nodes per label at 1.0)")

    p = argparse.ArgumentParser(prog="onesided", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("simulate", parents=[common], help="sample particle positions")
    s.add_argument("--init", choices=["flat", "finite", "step"], default="flat",
                   help="infinite flat system, or particles 1..N from x_k(0) = -k (finite) or 0 (step)")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--labels", default="0")
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--n-rep", type=int, default=1000)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--grid", action="store_true", help="reflect on the time grid only")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("kernel", parents=[common], help="evaluate a correlation kernel")
    k.add_argument("--kind", choices=["finite", "flat", "airy1"], default="flat")
    k.add_argument("--t", type=float, default=1.0)
    k.add_argument("--labels-pair", type=float, nargs=2, default=[1, 1], metavar=("N1", "N2"),
                   help="labels (times r for airy1)")
    k.add_argument("--x1", default="0")
    k.add_argument("--x2", default="0")
    k.set_defaults(func=cmd_kernel)

    f = sub.add_parser("fredholm", parents=[common], help="joint probability as a Fredholm determinant")
    f.add_argument("--kind", choices=["finite", "flat", "airy1"], default="flat")
    f.add_argument("--t", type=float, default=1.0)
    f.add_argument("--labels", default="0", help="comma separated labels (times r for airy1)")
    f.add_argument("--thresholds", default="0", help="comma separated thresholds")
    f.add_argument("--tol", type=float, default=1e-8)
    f.set_defaults(func=cmd_fredholm)

    e = sub.add_parser("experiment", parents=[common], help="run an experiment and write its report")
    e.add_argument("id", nargs="?", choices=sorted(ex.EXPERIMENTS))
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("validate-contours", parents=[common], help="check the contour properties")
    v.add_argument("--rho", default="0,0.1,0.5")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sim.set_threads(args.threads)
    if args.verb == "kernel" and args.kind != "airy1":
        args.labels_pair = [int(v) for v in args.labels_pair]
    if args.verb != "experiment" and args.seed is None:
        args.seed = 0
    if args.verb != "experiment" and args.config:
        print("--config applies to the experiment verb", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
