"""Busy-time fluid limit under exactly balanced load: sup_t |sum_j Bbar_j(t) - t| across r."""

import argparse

import numpy as np

from qubit_queue.distributions import BatchLaw, Law
from qubit_queue.engine import ClassParams, simulate_queues
from qubit_queue.limits import diffusion_scale, fluid_deviation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--r", type=float, nargs="+", default=[16, 64, 256, 1024])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    c = ClassParams(1, 0.5, Law("exponential"), BatchLaw("geometric", 2.0), 1.0, Law("exponential"), 1.0)
    rng = np.random.default_rng(args.seed)
    for r in args.r:
        devs = [fluid_deviation(diffusion_scale(simulate_queues([c], T=r, dt=1 / 64, rng=rng), r))
                for _ in range(args.reps)]
        print(f"r={r:6g}: mean sup deviation {np.mean(devs):.4f}  (x sqrt(r): {np.mean(devs) * np.sqrt(r):.3f})")


if __name__ == "__main__":
    main()
