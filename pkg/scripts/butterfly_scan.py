#!/usr/bin/env python3
"""Scan the band intervals of the chain rotation pair over rational fluxes.

Writes a CSV (p, q, band, emin, emax) and, when matplotlib is available,
the interval plot with flux on the vertical axis.

Usage: butterfly_scan.py [-q Q_MAX] [-L GRID] [-o OUT.csv] [--plot OUT.png]
"""

import argparse

from blochfiber import butterfly


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--q-max", type=int, default=12,
                        help="largest flux denominator (default 12)")
    parser.add_argument("-L", "--grid", type=int, default=128,
                        help="torus grid points (default 128)")
    parser.add_argument("-o", "--output", default="butterfly.csv")
    parser.add_argument("--plot", help="also write a PNG interval plot")
    args = parser.parse_args()

    rows = butterfly(args.q_max, L=args.grid)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("p,q,band_index,emin,emax\n")
        for p, q, intervals in rows:
            for r, (lo, hi) in enumerate(intervals):
                fh.write(f"{p},{q},{r},{lo:.17g},{hi:.17g}\n")
    print(f"wrote {sum(q for _, q, _ in rows)} intervals to {args.output}")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(7, 7))
        for p, q, intervals in rows:
            beta = p / q
            for lo, hi in intervals:
                ax.plot([lo, hi], [beta, beta], "k-", linewidth=0.4)
        ax.set_xlabel("energy")
        ax.set_ylabel("flux p/q")
        fig.savefig(args.plot, dpi=200)
        print(f"wrote {args.plot}")


if __name__ == "__main__":
    main()
