#!/usr/bin/env python3
"""Run all acceptance criteria, print one line each, and write acceptance.csv.

    python scripts/run_acceptance.py --out runs/acceptance [--seed 0] [--scale 1.0]

``diamondlab report --dir runs/acceptance`` then aggregates the verdicts.
"""
import argparse
import sys
from pathlib import Path

from diamondlab.acceptance import run_all
from diamondlab.haar import default_seed
from diamondlab.storage import write_csv


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/acceptance")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--scale", type=float, default=1.0, help="sample-count multiplier (1.0 = contract values)")
    args = ap.parse_args(argv)
    seed = default_seed() if args.seed is None else args.seed
    results = run_all(seed, args.scale, echo=print)
    rows = [dict(r.row(), seed=seed, samples_scale=args.scale) for r in results]
    path = write_csv(Path(args.out) / "acceptance.csv", "acceptance",
                     ["criterion", "name", "verdict", "detail", "seconds", "seed", "samples_scale"], rows)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria pass; wrote {path}")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
