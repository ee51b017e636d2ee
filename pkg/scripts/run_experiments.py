#!/usr/bin/env python3
"""Run experiment configs and evaluate their acceptance checks.

    python scripts/run_experiments.py                      # every config in scripts/configs
    python scripts/run_experiments.py crt-ball oracle-suite --threads 4
    python scripts/run_experiments.py --full               # built-in full-scale presets
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from lqgdim.acceptance import check_acceptance
from lqgdim.config import EXPERIMENTS, ExperimentConfig, load_config
from lqgdim.runner import run

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", help="config stems (default: all)")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--full", action="store_true", help="use the full-scale presets instead of the JSON files")
    ap.add_argument("--root", default="results", help="output root for --full runs")
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR, format="%(levelname)s %(name)s: %(message)s")

    if args.full:
        names = args.names or list(EXPERIMENTS)
        configs = {n: ExperimentConfig.preset(n, output_dir=f"{args.root}/{n}") for n in names}
    else:
        names = args.names or sorted(p.stem for p in CONFIG_DIR.glob("*.json"))
        configs = {n: load_config(CONFIG_DIR / f"{n}.json") for n in names}

    failed = []
    for name, cfg in configs.items():
        if args.threads:
            cfg.threads = args.threads
        if args.seed is not None:
            cfg.master_seed = args.seed
        outcome = run(cfg.validate())
        report = check_acceptance(cfg)
        print(f"== {name}: {outcome.runtime_s:.1f} s -> {outcome.output_dir}")
        print("\n".join("   " + line for line in report.lines()))
        if not report.passed:
            failed.append(name)
    if failed:
        print("failed:", ", ".join(failed))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
