"""Estimated sup-tail of the sequential sample median against n, with its log-slope."""

import argparse

import numpy as np

from supremal.bounds import TheoremId, model_bound
from supremal.montecarlo import Scenario, estimate_sup_tail
from supremal.presets import get_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x", type=float, default=0.3)
    ap.add_argument("--replications", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--n", type=int, nargs="+", default=[20, 50, 100, 200])
    args = ap.parse_args()
    model = get_preset("quantile")
    print("n,p_hat,ci_low,ci_high,ExpAbs")
    p = []
    for n in args.n:
        sc = Scenario(model, n, 50 * n, (args.x,), args.replications, args.seed)
        est = estimate_sup_tail(sc, args.x, "abs", workers=args.workers)
        bound = model_bound(TheoremId.EXP_ABS, model, n, args.x).clamped
        print(f"{n},{est.p_hat:.6g},{est.ci_low:.6g},{est.ci_high:.6g},{bound:.6g}")
        p.append(est.p_hat)
    p = np.asarray(p)
    if np.all(p > 0):
        print(f"slope of log p_hat on n: {np.polyfit(args.n, np.log(p), 1)[0]:.6g}")
    else:
        print("some p_hat are zero; raise --replications")


if __name__ == "__main__":
    main()
