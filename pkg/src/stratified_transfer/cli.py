"""Command-line entry point: ``stl features | run | synth``.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

import argparse
import logging
import sys

from . import bench
from .exceptions import InvalidInput, NumericalFailure, STLError
from .features import load_sensor_csv, sensor_features

logger = logging.getLogger("stratified_transfer")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2


def _cmd_features(args):
    streams = [load_sensor_csv(path, args.rate) for path in args.input]
    X, y = sensor_features(streams, args.window, args.overlap)
    bench.write_feature_csv(args.out, X, y)
    print(f"wrote {X.shape[0]} windows x {X.shape[1]} features to {args.out}")


def _cmd_run(args):
    cfg = bench.default_config(args.dim, args.lambda_, args.iters, args.kernel, args.seed)
    spec = bench.TaskSpec(
        args.source, args.target, args.truth, cfg, args.method, args.repeats, args.seed
    )
    report = bench.run_task(spec)
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(report.summary(), file=sys.stderr)


def _cmd_synth(args):
    src, tgt = bench.synth_shift(
        args.classes, args.per_class, args.dim, args.shift, args.scale, args.seed
    )
    prefix = args.out_prefix
    bench.write_feature_csv(f"{prefix}source.csv", src.X, src.y)
    bench.write_feature_csv(f"{prefix}target.csv", tgt.X)
    bench.write_labels_csv(f"{prefix}truth.csv", tgt.y)
    print(f"wrote {prefix}source.csv, {prefix}target.csv, {prefix}truth.csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="stl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract window features from raw sensor CSVs")
    p.add_argument("--input", action="append", required=True,
                   help="raw CSV with columns t,x,y,z[,label]; repeat once per sensor")
    p.add_argument("--rate", type=float, required=True, help="sampling rate in Hz")
    p.add_argument("--window", type=float, default=5.0, help="window length in seconds")
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("run", help="label a target domain and report accuracy")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--truth")
    p.add_argument("--method", choices=bench.METHODS, default="stl")
    p.add_argument("--dim", type=int, default=30)
    p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("synth", help="write a synthetic shifted source/target pair")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--shift", type=float, default=2.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out-prefix", default="synth_")
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NumericalFailure as exc:
        print(f"stl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidInput, OSError) as exc:
        print(f"stl: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except STLError as exc:
        print(f"stl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
