"""Reflected Brownian oracle against closed forms: the driftless mean and the CDF with drift."""

import argparse
import math

import numpy as np
from scipy import stats

from qubit_queue.limits import RBMParams, rbm_cdf, rbm_oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=4096)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    x = rbm_oracle(RBMParams(0.0, 1.0), 1.0, args.reps, rng, steps=args.steps)
    target = math.sqrt(2 / math.pi)
    print(f"theta=0 sigma2=1: mean {x.mean():.5f} vs {target:.5f} ({x.mean() / target - 1:+.3%})")

    for bridge in (True, False):
        p = RBMParams(-1.0, 8.0)
        y = rbm_oracle(p, 1.0, min(args.reps, 20_000), rng, steps=args.steps, bridge=bridge)
        res = stats.kstest(y, lambda v: rbm_cdf(v, p, 1.0))
        print(f"theta=-1 sigma2=8 bridge={bridge}: KS {res.statistic:.4f}, p-value {res.pvalue:.3g}")


if __name__ == "__main__":
    main()
