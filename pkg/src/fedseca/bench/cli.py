"""``fedseca-bench``: run experiments, matrices, sweeps, timings, diagnostics and oracle checks.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

import argparse
import sys
from typing import List, Optional

from fedseca.bench import runner
from fedseca.bench.config import ConfigError, ExperimentSpec, load_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedseca-bench", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML experiment file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, metavar="N", help="run only this seed")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel worker processes")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, helptext in [
        ("run", "one experiment per seed: per-round CSV and summary JSON"),
        ("matrix", "defense x attack x seed grid, long and wide result tables"),
        ("sweep-byz", "final score versus the number of Byzantine clients"),
        ("bench", "single-call aggregator timing"),
        ("diag", "similarity of crafted updates to the honest mean"),
        ("oracle-check", "brute-force reference checks of the aggregation primitives"),
    ]:
        sub.add_parser(name, parents=[common], help=helptext)
    return parser


def _spec(args) -> ExperimentSpec:
    if not args.config:
        raise ConfigError("--config is required for this command", "--config")
    spec = load_config(args.config)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    return spec


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "oracle-check":
            return runner.run_oracle_check(0 if args.seed is None else args.seed, args.out)
        spec = _spec(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or spec.out_dir
    log = print
    try:
        if args.command == "run":
            return runner.run_single(spec, out, log)
        if args.command == "matrix":
            return runner.run_matrix(spec, out, args.jobs, log)
        if args.command == "sweep-byz":
            return runner.run_sweep(spec, out, args.jobs, log)
        if args.command == "bench":
            runner.run_bench(spec, out, log)
            return EXIT_OK
        if args.command == "diag":
            return runner.run_diag(spec, out, log)
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
