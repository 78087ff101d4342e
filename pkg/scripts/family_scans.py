"""Scan Family A and the three B slices; print label counts per slice.

    python3 scripts/family_scans.py [--outdir data/families]
"""

import argparse
from pathlib import Path

from magicsimplex import pipeline as pl


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--outdir", type=Path, default=None, help="also write one CSV per slice")
    args = ap.parse_args()
    for fam in ("A", "B1", "B2", "B3"):
        ds = pl.scan_family(pl.family_spec(fam))
        counts = pl.family_counts(ds)
        print(fam, " ".join(f"{k} {v}" for k, v in counts.items()))
        if args.outdir:
            args.outdir.mkdir(parents=True, exist_ok=True)
            pl.dataset_write(ds, args.outdir / f"family_{fam}.csv")


if __name__ == "__main__":
    main()
