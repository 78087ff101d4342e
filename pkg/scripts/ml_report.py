"""Scenario comparison, PCA structure and PCA-then-kNN on a mined grid dataset.

    python3 scripts/ml_report.py data/grid18.csv
"""

import argparse
from pathlib import Path

import numpy as np

from magicsimplex import analysis as an
from magicsimplex import pipeline as pl
from magicsimplex.pipeline import Label


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("dataset", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    ds = pl.dataset_read(args.dataset)
    print("counts", ds.counts())

    results = an.scenario_sweep(ds, workers=args.workers)
    for r in results:
        print(f"k={r.k} UNKNOWN->SEP {r.sep.accuracy:.4f} UNKNOWN->BOUND {r.bound.accuracy:.4f}")
    best = an.best_scenario(results)
    print(f"best k={best.k}\nUNKNOWN->SEP\n{best.sep.format()}\nUNKNOWN->BOUND\n{best.bound.format()}")

    bound = ds.subset(ds.labels == Label.BOUND)
    model = an.pca_fit(bound.coeffs)
    n = an.unique_projected_points(bound.coeffs, model)
    print(f"BOUND {len(bound)} -> {n} unique 2-D points; symmetry {an.orbit_action_symmetry(model, bound.coeffs)}")
    for k, (m, s) in an.mean_radii(an.pca_fit(ds.coeffs), ds).items():
        print(f"radius {k} {m:.4f} +- {s:.4f}")

    for dims in (3, 9):
        cm = an.pca_then_knn(ds, dims=dims, k=best.k, workers=args.workers)
        rec = " ".join(f"{k} {v:.3f}" for k, v in cm.recalls().items())
        print(f"pca dims={dims} accuracy {cm.accuracy:.4f} recalls {rec}")


if __name__ == "__main__":
    main()
