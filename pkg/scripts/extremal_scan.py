"""Walk the extremal family from the line state outward and report detectors.

    python3 scripts/extremal_scan.py [--steps 8]
"""

import argparse
from fractions import Fraction

from magicsimplex import cli


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=8)
    args = ap.parse_args()
    for i in range(1, args.steps + 1):
        x = Fraction(i, 9 * args.steps)
        for variant in (1, 2):
            print(f"# x={x} variant={variant}")
            cli.main(["extremal", "--x", str(x), "--variant", str(variant)])


if __name__ == "__main__":
    main()
