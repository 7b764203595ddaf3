#!/usr/bin/env python3
"""Per-band Chern numbers of the magnetic square lattice over a flux list.

Usage: hofstadter_cherns.py [-q Q_MAX] [-L GRID]
"""

import argparse
import math

from blochfiber import GapTooSmallError, TorusGrid, chern_number, hofstadter_model


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--q-max", type=int, default=5,
                        help="largest flux denominator (default 5)")
    parser.add_argument("-L", "--grid", type=int, default=48,
                        help="grid points per dimension (default 48)")
    args = parser.parse_args()

    for q in range(2, args.q_max + 1):
        for p in range(1, q):
            if math.gcd(p, q) != 1:
                continue
            model = hofstadter_model(p, q, M=5)
            grid = TorusGrid(N=2, L=args.grid)
            cherns = []
            for r in range(q):
                try:
                    cherns.append(chern_number(model, [r], grid).chern)
                except GapTooSmallError:
                    cherns.append(None)
            shown = ["gapless" if c is None else str(c) for c in cherns]
            print(f"flux {p}/{q}: bands [{', '.join(shown)}]")


if __name__ == "__main__":
    main()
