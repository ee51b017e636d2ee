"""Command-line entry point: ``lqgdim <experiment> [--config FILE] [overrides] [--check]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .acceptance import check_acceptance
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, default_threads, load_config
from .errors import MissingInputError
from .runner import run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not runtime errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lqgdim", description="Reproducible LQG dimension experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS + ("check",), help="experiment to run, or 'check' for an existing run")
    p.add_argument("--config", help="JSON config file; flags below override its values")
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--threads", type=int, help="worker threads (default: $LQGDIM_THREADS or 1)")
    p.add_argument("--replicates", type=int)
    p.add_argument("--n", type=int, help="lattice size, or walk length for crt-ball")
    p.add_argument("--scales", type=float, nargs="+", help="epsilons, box sizes or deltas")
    p.add_argument("--model", choices=("lfpp_discrete", "lfpp_grid"))
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--check", action="store_true", help="evaluate acceptance criteria after the run")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_OVERRIDES = ("gamma", "master_seed", "threads", "replicates", "n", "model", "output_dir")


def resolve_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigError(f"config is for {cfg.experiment!r}, command asked for {args.experiment!r}")
        data = cfg.to_dict()
    else:
        data = {"experiment": args.experiment}
    for key in _OVERRIDES:
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.scales is not None:
        data["scales"] = [int(s) if float(s).is_integer() and s >= 4 else s for s in args.scales]
    if "threads" not in data:
        data["threads"] = default_threads()
    return ExperimentConfig.from_dict(data).validate()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors exit 1
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.experiment == "check":
        if not args.output_dir:
            print("lqgdim check: --output-dir is required", file=sys.stderr)
            return EXIT_CONFIG
        try:
            report = check_acceptance(args.output_dir)
        except MissingInputError as exc:
            print(f"lqgdim: missing input: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print("\n".join(report.lines()))
        return EXIT_OK if report.passed else EXIT_CHECK
    try:
        cfg = resolve_config(args)
    except (ConfigError, TypeError) as exc:
        print(f"lqgdim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outcome = run(cfg)
    except MemoryError:
        print("lqgdim: out of memory", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to exit 2
        logging.getLogger("lqgdim").debug("run failed", exc_info=True)
        print(f"lqgdim: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {outcome.output_dir} in {outcome.runtime_s:.1f} s")
    if args.check:
        report = check_acceptance(cfg)
        print("\n".join(report.lines()))
        if not report.passed:
            return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
