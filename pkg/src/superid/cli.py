"""Command line interface: ``superid run`` and ``superid sweep``."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import (
    EXIT_CODES,
    ConfigError,
    RunConfig,
    _fraction,
    format_summary,
    format_table,
    load_config,
    run_single,
    run_sweep,
)
from .fem import SolverError


def _add_common(p):
    p.add_argument("--config", help="sectioned key-value config file")
    p.add_argument("--preset", choices=["example1", "example2", "custom"])
    p.add_argument("--nu1", type=_fraction, help="L1 weight, e.g. 1/1024")
    p.add_argument("--nu2", type=_fraction, help="L2 (Tikhonov) weight")
    p.add_argument("--q", type=int, help="quadrature points per control cell")
    p.add_argument("--eps2", type=float, help="termination tolerance for the stationarity measure")
    p.add_argument("--sigma", type=float, help="initial trial step")
    p.add_argument("--omega", type=float, help="backtracking factor")
    p.add_argument("--theta", type=float, help="sufficient-decrease factor")
    p.add_argument("--tau-floor", dest="tau_floor", type=float)
    p.add_argument("--max-outer", dest="max_outer", type=int)
    p.add_argument("--mass", choices=["lumped", "consistent"],
                   help="mass matrix for load, tracking term and level-set integrals")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="superid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single optimization run")
    _add_common(run)
    run.add_argument("--ny", dest="n_y", type=int, help="state mesh: cells per side (h_y = 1/ny)")
    run.add_argument("--nu", dest="n_u", type=int, help="control width h_u = 1/nu")
    run.add_argument("--n-cells", dest="n_cells", type=int, help="number of control cells (overrides --nu)")

    sweep = sub.add_parser("sweep", help="sweep over widths, a width grid, or nu1 values")
    _add_common(sweep)
    sweep.add_argument("--ny", dest="sweep_ny", type=int, nargs="*", help="list of 1/h_y")
    sweep.add_argument("--nu", dest="sweep_nu", type=int, nargs="*",
                       help="list of 1/h_u; with --ny gives an iteration-count grid")
    sweep.add_argument("--nu1-list", dest="sweep_nu1", type=_fraction, nargs="*")
    sweep.add_argument("--fixed-ny", dest="n_y", type=int, help="state mesh for nu1 sweeps")
    return parser


_SKIP = {"command", "config", "verbose"}


def _config_from_args(args):
    overrides = {k: v for k, v in vars(args).items() if k not in _SKIP and v is not None}
    if args.config:
        return load_config(args.config, **overrides)
    return RunConfig(**overrides)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config_from_args(args)
    except (ConfigError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    if args.command == "run":
        try:
            result = run_single(config)
        except ConfigError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return 2
        except SolverError as exc:
            where = f" at iteration {exc.iteration}" if exc.iteration is not None else ""
            print(f"solver failure{where}: {exc}", file=sys.stderr)
            return EXIT_CODES["solver_failure"]
        sys.stdout.write(format_summary(result.summary))
        return result.exit_code

    try:
        header, rows = run_sweep(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(format_table(header, rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
