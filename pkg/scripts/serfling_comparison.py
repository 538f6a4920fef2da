"""Tabulate the two quantile bounds and their ratio as x shrinks."""

import argparse

from supremal.bounds import quantile_bounds
from supremal.distributions import Normal


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--alpha", type=float, default=0.5)
    args = ap.parse_args()
    print("x,ferger_sup,serfling_sup,ratio")
    for x in (1e-3, 1e-2, 0.1, 0.3, 1.0):
        qb = quantile_bounds(Normal(), args.alpha, args.n, x)
        f, s = qb.ferger_sup.raw, qb.serfling_sup.raw
        print(f"{x:g},{f:.6g},{s:.6g},{s / f:.6g}")


if __name__ == "__main__":
    main()
