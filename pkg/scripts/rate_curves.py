"""Single-epoch rate g(eta) against eta for several eigenvalue ratios.

Prints a table and writes it as CSV (columns eta, then one per ratio).

    python3 scripts/rate_curves.py --m 20 --out rate_curves.csv
"""
import argparse
import csv

import numpy as np

from vrhb.data import BENCHMARK_DATASETS
from vrhb.rates import g_of_eta


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--out", default="rate_curves.csv")
    args = ap.parse_args(argv)

    ratios = {"spectrum-b": 0.95}
    ratios.update({name: meta["ratio"] for name, meta in BENCHMARK_DATASETS.items()})
    etas = np.linspace(0, 1, args.points + 1)
    table = [[g_of_eta(float(e), 1.0, r, args.m) for r in ratios.values()] for e in etas]

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta"] + list(ratios))
        for e, row in zip(etas, table):
            w.writerow([f"{e:.17g}"] + [f"{v:.17g}" for v in row])

    print("eta    " + " ".join(f"{k:>11s}" for k in ratios))
    for e, row in zip(etas, table):
        print(f"{e:5.2f}  " + " ".join(f"{v:11.3e}" for v in row))
    print(f"written to {args.out}")


if __name__ == "__main__":
    main()
