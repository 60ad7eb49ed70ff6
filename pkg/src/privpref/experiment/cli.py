"""Command-line entry point: ``privpref run|plot|check-privacy|gradcheck``.

Exit status is 0 on success (or PASS), 1 on FAIL and 2 on usage or
configuration errors.
"""

import argparse
import logging
import sys

from ..exceptions import ConfigError, DomainError
from ..privacy import RngStream
from .checks import check_privacy, gradcheck
from .config import load_config
from .plot import emit_svg
from .sweep import run_sweep

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _cmd_run(args):
    config = load_config(args.config)
    if args.output:
        config.output_path = args.output
    records = run_sweep(config, workers=args.workers)
    print(f"wrote {len(records)} records to {config.output_path}")
    return EXIT_OK


def _cmd_plot(args):
    emit_svg(args.csv, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_check_privacy(args):
    report = check_privacy(args.eps, args.trials, RngStream(args.seed))
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_gradcheck(args):
    report = gradcheck(args.seed, args.cases)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="privpref", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a simulation sweep from a config file")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None, help="override the config's worker count")
    p.add_argument("--output", default=None, help="override the config's output_path")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("plot", help="render a results CSV as SVG")
    p.add_argument("csv")
    p.add_argument("out")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("check-privacy", help="empirical frequency test of RR and K-RR")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check_privacy)

    p = sub.add_parser("gradcheck", help="verify analytic gradients and unbiasedness identities")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
