#!/usr/bin/env python3
"""Run the convergence study of one or more shipped configs and print the fits.

    python scripts/rate_study.py heat_white.cfg heat_mult.cfg --paths 8 --workers 4
"""
import argparse
import warnings

from spdepath.harness.config import load_config
from spdepath.harness.convergence import run_convergence


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--paths", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", help="write errors.csv/report.txt under OUT/<config name>")
    args = ap.parse_args()
    for name in args.configs:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            config = load_config(name).with_overrides(paths=args.paths, seed=args.seed)
        report = run_convergence(config, workers=args.workers)
        print(f"== {name}")
        print(report.summary(), end="")
        if args.out:
            report.write(f"{args.out}/{name.rsplit('.', 1)[0]}")


if __name__ == "__main__":
    main()
