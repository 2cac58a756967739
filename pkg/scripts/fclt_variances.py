"""Empirical variances of the centered arrival and service counts against their limits.

Batch Poisson arrivals with geometric batches; prints one row per r.
"""

import argparse
import math

import numpy as np

from qubit_queue.distributions import BatchLaw, Law
from qubit_queue.engine import ClassParams, sample_dsrrrf, sample_service_counts


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=0.5)
    ap.add_argument("--m", type=float, default=2.0)
    ap.add_argument("--reps", type=int, default=5000)
    ap.add_argument("--r", type=float, nargs="+", default=[25, 100, 400])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    batch = BatchLaw("geometric", args.m) if args.m > 1 else BatchLaw("deterministic", 1)
    c = ClassParams(1, args.lam, Law("exponential"), batch, 1.0, Law("exponential"), args.m * args.lam)
    gamma_a = c.m**2 * c.arrival_rate * (c.zeta2 + c.alpha2)
    gamma_s = c.service_rate * c.beta2
    rng = np.random.default_rng(args.seed)
    print(f"limits: Var A = {gamma_a:.4f}, Var S = {gamma_s:.4f}")
    print(f"{'r':>8} {'Var A':>8} {'rel err':>8} {'Var S':>8} {'rel err':>8}")
    for r in args.r:
        sr = math.sqrt(r)
        A = np.array([sample_dsrrrf(c, r, rng).counts(r) for _ in range(args.reps)])
        S = np.array([sample_service_counts(c, r, rng) for _ in range(args.reps)])
        va = np.var((A - c.m * c.arrival_rate * r) / sr, ddof=1)
        vs = np.var((S - c.service_rate * r) / sr, ddof=1)
        print(f"{r:8g} {va:8.4f} {va / gamma_a - 1:+8.2%} {vs:8.4f} {vs / gamma_s - 1:+8.2%}")


if __name__ == "__main__":
    main()
