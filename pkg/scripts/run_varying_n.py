"""Varying-level ladder (qubit count as the scaling index): KS of Vhat(1) against the reflected Brownian oracle."""

import argparse

from qubit_queue.config import demo_config
from qubit_queue.runner import run_experiment, with_overrides


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--out", default="results/varying-n")
    ap.add_argument("--paths", action="store_true")
    args = ap.parse_args()
    cfg = with_overrides(demo_config("varying-n"), seed=args.seed, reps=args.reps, out=args.out, paths=args.paths)
    report = run_experiment(cfg)
    print("\n".join(report.lines()))
    print(f"{'all checks passed' if report.passed else 'some checks failed'} ({report.timings['total']:.0f}s)")


if __name__ == "__main__":
    main()
