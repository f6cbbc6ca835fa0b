#!/usr/bin/env python3
"""Operation-count sweep over block sizes for the complexity comparison.

Counts the scalar operations of one estimation pass for each method at a
grid of block sizes and prints the per-doubling growth ratios.  The leading
terms follow the published accounting (quadratic for ML/AIC/MMSE paths;
the covariance-based method carries a cubic naive matrix multiply).

Usage:
    python scripts/complexity_sweep.py [--sizes 64,128,256,512] [--out ops.csv]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from noisebench import MethodSpec, count_ops

METHODS = [
    MethodSpec("ML", "rof"),
    MethodSpec("ML", "fisher"),
    MethodSpec("AIC"),
    MethodSpec("CBE"),
    MethodSpec("MMSE"),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="64,128,256,512")
    parser.add_argument("--out", default=None)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    lines = ["method,separation,size,ops_add,ops_mul,ops_cmp,ops_transcendental,ops_total"]
    print(f"{'method':<12} " + " ".join(f"{s:>12}" for s in sizes) + "   growth")
    for spec in METHODS:
        totals = []
        for size in sizes:
            counter = count_ops(spec, size)
            c = counter.counts
            totals.append(c.total())
            lines.append(f"{spec.estimator},{spec.separation},{size},"
                         f"{c.adds},{c.muls},{c.cmps},{c.transcendental},{c.total()}")
        ratios = [totals[i + 1] / totals[i] for i in range(len(totals) - 1)]
        growth = " ".join(f"x{r:.2f}" for r in ratios)
        print(f"{spec.label:<12} " + " ".join(f"{t:>12}" for t in totals) + f"   {growth}")

    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
