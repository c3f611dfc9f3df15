"""Command line interface.

Subcommands:
  simulate    draw a sample from one of the built-in designs, write CSV
  estimate    classical + back-transform mean/covariance from a sample CSV
  test        stepdown test for endpoint/coefficient dependence
  experiment  Monte-Carlo bias/variance or test-selection tables

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .dgp import KINDS, DgpConfig, draw_sample, draw_v2_sample
from .errors import ArgumentError, NumericalError, ParseError
from .harness import (
    MODE_BIAS_VARIANCE,
    MODE_TEST_SELECTION,
    ExperimentSpec,
    estimate_cmd,
    run_experiment,
    test_cmd,
    write_experiment_csv,
)
from .io import read_sample_csv, write_coefficient_sidecar, write_sample_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

V2_KIND = "V2"


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _csv_ints(text):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")


def _csv_strs(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ftcfd", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw a sample from a built-in design")
    sim.add_argument("--dgp", required=True, choices=KINDS + (V2_KIND,))
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--p", type=int, default=501)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="sample CSV path")
    sim.add_argument(
        "--sidecar", help="optional CSV path for the per-curve d_i and coefficients"
    )

    est = sub.add_parser("estimate", help="mean/covariance estimates from a CSV")
    est.add_argument("input", help="sample CSV path")
    est.add_argument("--out", required=True, help="output directory")
    est.add_argument(
        "--d-f", type=float, default=None, help="explicit integration anchor"
    )
    est.add_argument(
        "--fpc-scores",
        action="store_true",
        help="also write principal component scores on the fully observed subdomain",
    )

    tst = sub.add_parser("test", help="stepdown dependence test from a CSV")
    tst.add_argument("input", help="sample CSV path")
    tst.add_argument("--out", help="report path (default: stdout)")
    tst.add_argument("--alpha", type=float, default=0.05)
    tst.add_argument("--bootstrap", type=int, default=1000, help="replications R")
    tst.add_argument("--j-max", type=int, default=51)
    tst.add_argument("--seed", type=int, default=0)

    exp = sub.add_parser("experiment", help="Monte-Carlo summary tables")
    exp.add_argument(
        "--mode",
        choices=(MODE_BIAS_VARIANCE, MODE_TEST_SELECTION),
        help="experiment mode",
    )
    exp.add_argument("--dgp", type=_csv_strs, help="comma-separated design kinds")
    exp.add_argument("--n", type=_csv_ints, help="comma-separated sample sizes")
    exp.add_argument("--reps", type=int, help="replications per cell")
    exp.add_argument("--p", type=int, help="grid size")
    exp.add_argument("--alpha", type=float)
    exp.add_argument("--bootstrap", type=int, help="replications R")
    exp.add_argument("--j-max", type=int)
    exp.add_argument("--seed", type=int)
    exp.add_argument(
        "--targets", type=_csv_strs, help="bias_variance targets: mean,cov"
    )
    exp.add_argument("--config", help="key=value file supplying defaults")
    exp.add_argument("--out", required=True, help="result CSV path")
    return parser


def _read_config(path) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ParseError("expected key=value", line=lineno)
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}")
    return out


_EXPERIMENT_DEFAULTS = {
    "mode": MODE_BIAS_VARIANCE,
    "dgp": KINDS,
    "n": (50, 150, 250, 500),
    "reps": 200,
    "p": 501,
    "alpha": 0.05,
    "bootstrap": 1000,
    "j_max": 51,
    "seed": 0,
    "targets": ("mean", "cov"),
}

_CONFIG_PARSERS = {
    "mode": str,
    "dgp": _csv_strs,
    "n": _csv_ints,
    "reps": int,
    "p": int,
    "alpha": float,
    "bootstrap": int,
    "j_max": int,
    "seed": int,
    "targets": _csv_strs,
}


def _experiment_spec(args) -> ExperimentSpec:
    config = _read_config(args.config) if args.config else {}
    merged = {}
    for key, default in _EXPERIMENT_DEFAULTS.items():
        value = getattr(args, key)
        if value is None and key in config:
            try:
                value = _CONFIG_PARSERS[key](config[key])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ArgumentError(f"bad config value for {key}: {exc}")
        merged[key] = default if value is None else value
    unknown = set(config) - set(_EXPERIMENT_DEFAULTS)
    if unknown:
        raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentSpec(
        mode=merged["mode"],
        kinds=tuple(merged["dgp"]),
        n_values=tuple(merged["n"]),
        replications=merged["reps"],
        p=merged["p"],
        J_max=merged["j_max"],
        alpha=merged["alpha"],
        R=merged["bootstrap"],
        seed=merged["seed"],
        targets=tuple(merged["targets"]),
    )


def _cmd_simulate(args) -> int:
    if args.dgp == V2_KIND:
        sample, d, xi = draw_v2_sample(args.n, p=args.p, seed=args.seed)
    else:
        sample, d, xi = draw_sample(
            DgpConfig(args.dgp, n=args.n, p=args.p, seed=args.seed)
        )
    write_sample_csv(sample, args.out)
    if args.sidecar:
        write_coefficient_sidecar(args.sidecar, d, xi)
    return EXIT_OK


def _cmd_estimate(args) -> int:
    sample = read_sample_csv(args.input)
    written = estimate_cmd(
        sample, args.out, d_f=args.d_f, fpc_scores=args.fpc_scores
    )
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_test(args) -> int:
    sample = read_sample_csv(args.input)
    text = test_cmd(
        sample,
        out_path=args.out,
        J_max=args.j_max,
        alpha=args.alpha,
        R=args.bootstrap,
        seed=args.seed,
    )
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    spec = _experiment_spec(args)
    result = run_experiment(spec)
    out_dir = os.path.dirname(args.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    write_experiment_csv(result, args.out)
    print(args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "estimate": _cmd_estimate,
        "test": _cmd_test,
        "experiment": _cmd_experiment,
    }
    try:
        return handlers[args.command](args)
    except ParseError as exc:
        print(f"ftcfd: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"ftcfd: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ArgumentError as exc:
        print(f"ftcfd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ftcfd: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
