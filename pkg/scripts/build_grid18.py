"""Classify the Delta=1/18 grid and mine random witnesses on its UNKNOWN points.

    python3 scripts/build_grid18.py --out data/grid18.csv [--budget 20000 --seed 7]

Mining resumes from the witness store if it already exists.
"""

import argparse
import sys
from pathlib import Path

from magicsimplex import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("data/grid18.csv"))
    ap.add_argument("--budget", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--stall", type=int, default=500)
    ap.add_argument("--store", type=Path, default=Path("artifacts/grid18.witnesses-7.jsonl"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    plain = args.out.with_name(args.out.stem + "_analytic.csv")
    if not plain.exists():
        code = cli.main(["grid-classify", "--delta", "1/18", "--out", str(plain), "--workers", str(args.workers)])
        if code:
            return code
    return cli.main([
        "-v", "mine", "--in", str(plain), "--out", str(args.out), "--budget", str(args.budget),
        "--seed", str(args.seed), "--stall", str(args.stall), "--store", str(args.store),
    ])


if __name__ == "__main__":
    sys.exit(main())
