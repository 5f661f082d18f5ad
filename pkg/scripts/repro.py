"""Reproduce the case study end to end and print the report.

Usage: python3 scripts/repro.py [--out DIR] [--steps N] [--seed S]
"""

import argparse
import sys

from symobs.pipeline import ReproConfig, StageError, format_report, repro


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="repro_out")
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--menu-depth", type=int, default=0)
    args = ap.parse_args()
    try:
        report = repro(ReproConfig(args.out, args.steps, args.seed, args.menu_depth))
    except StageError as exc:
        print(exc, file=sys.stderr)
        return 3 if exc.internal else 1
    print(format_report(report), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
