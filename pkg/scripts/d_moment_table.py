#!/usr/bin/env python3
"""Tabulate E Tr|D|^2: Monte Carlo against the stated two-term formula and the
recomputed exact value, on a small grid of equal-case parameters."""
import argparse

from diamondlab.ensembles import Case, EnsembleParams
from diamondlab.haar import SeededRng
from diamondlab.moments import (
    d_moment_samples,
    d_second_moment_exact,
    d_second_moment_formula,
    mean_and_stderr,
)

GRID = [(4, 2, 2, 0.2), (8, 4, 2, 0.1), (6, 3, 2, 0.2), (8, 2, 4, 0.1), (9, 3, 3, 0.15)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'d_A d_B r eps':>16} {'MC':>10} {'stderr':>9} {'stated':>10} {'z':>7} {'exact':>10} {'z':>6}")
    for i, pt in enumerate(GRID):
        p = EnsembleParams(*pt, case=Case.EQUAL)
        est, se = mean_and_stderr(d_moment_samples(p, args.samples, SeededRng(args.seed, i))[:, 1])
        f, e = d_second_moment_formula(p), d_second_moment_exact(p)
        print(f"{str(pt):>16} {est:10.6f} {se:9.2e} {f:10.6f} {(est - f) / se:7.1f} {e:10.6f} {(est - e) / se:6.1f}")


if __name__ == "__main__":
    main()
