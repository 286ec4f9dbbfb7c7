#!/usr/bin/env python3
"""Plot mean error against K from a sweep.csv written by `zofl sweep-k`."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt


def main(path, out="sweep.png"):
    rows = defaultdict(list)
    with open(path) as f:
        for r in csv.DictReader(f):
            rows[r["scheme"]].append((int(r["K"]), float(r["mean_err"]), float(r["se"])))
    for scheme, pts in sorted(rows.items()):
        pts.sort()
        k, m, se = zip(*pts)
        plt.errorbar(k, m, yerr=se, marker="o", capsize=3, label=scheme)
    plt.xscale("log", base=3)
    plt.xlabel("K (local oracle calls per round)")
    plt.ylabel("f(x) - f*")
    plt.legend()
    plt.savefig(out, dpi=120, bbox_inches="tight")


if __name__ == "__main__":
    main(*sys.argv[1:])
