"""Experiment orchestration: ladders, cells, result files and summary checks.

Seeding: replication ``i`` of ladder cell ``c`` draws from
``SeedSequence(seed, spawn_key=(c, i))``; the oracle sample of row ``k`` uses
``spawn_key=(2**31 - 1, k)``.  Output content therefore depends only on the
configuration and the master seed.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .engine import idle_process, simulate_queues, write_path_csv
from .fields import (
    RegimeLadder,
    build_regime_fixed_n,
    build_regime_varying_n,
    cap_ladder,
    default_theta_sequence,
)
from .limits import (
    GRID_STEPS_PER_UNIT,
    CellResult,
    _rng,
    cell_dict,
    convergence_experiment,
    write_results_csv,
    write_summary_json,
)
from .selfcheck import SuiteResult, algebra_suites, skorohod_suite

KS_FINAL_THRESHOLD = 0.08
LADDER_TOL = 1e-12


@dataclass
class RunReport:
    config: ExperimentConfig
    cells: list = field(default_factory=list)
    suites: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def lines(self) -> list[str]:
        out = []
        for c in self.cells:
            out.append(f"{c.regime_mode} k={c.k_or_n} r={c.r:g}: KS={c.report.ks:.4f} "
                       f"(1% crit {c.report.ks_critical_1pct:.4f}) mean {c.report.mean_a:.3f}/{c.report.mean_b:.3f} "
                       f"fluid {c.fluid_sup_dev:.3f}")
        out += [f"{'PASS' if s.passed else 'FAIL'} {s.name}: {s.detail}" for s in self.suites]
        out += [f"{'PASS' if ok else 'FAIL'} {name}" for name, ok in self.checks.items()]
        return out


def build_ladder(cfg: ExperimentConfig) -> RegimeLadder:
    classes = cfg.class_params()
    m = [c.m for c in classes]
    mu = [c.mu for c in classes]
    reg = cfg.regime
    if cfg.mode == "fixed-n":
        caps = cap_ladder(cfg.center(), reg.rho0, reg.K)
        return build_regime_fixed_n(cfg.rate_field(), m, mu, reg.theta, reg.r_ladder, caps, reg.theta_k)
    return build_regime_varying_n(cfg.rate_field(), cfg.limit_point(), m, mu, reg.theta, reg.r_ladder,
                                  reg.n_ladder, reg.rho0, reg.theta_k)


def ladder_checks(cfg: ExperimentConfig, ladder: RegimeLadder, cells: list[CellResult]) -> dict:
    checks = {"ladder_exact": ladder.max_drift_error() < LADDER_TOL}
    for k in ladder.ks:
        ks = [c.report.ks for c in sorted((c for c in cells if c.k_or_n == k), key=lambda c: c.r)]
        checks[f"ks_nonincreasing_in_r[{k}]"] = all(b <= a for a, b in zip(ks, ks[1:]))
    last = max(cells, key=lambda c: (c.k_or_n, c.r))
    checks["ks_final_below_threshold"] = last.report.ks < KS_FINAL_THRESHOLD
    checks["complementarity"] = all(c.compl_ok for c in cells)
    if cfg.mode == "varying-n" and cfg.regime.theta_k is None:
        ns = ladder.ks
        target = default_theta_sequence(ladder.theta, ns)
        got = [ladder.row(n)[0].theta_k for n in ns]
        dev = [abs(t - ladder.theta) for t in got]
        checks["theta_n_formula"] = max(abs(a - b) for a, b in zip(got, target)) < LADDER_TOL
        checks["theta_n_strictly_converging"] = all(b < a for a, b in zip(dev, dev[1:]))
    return checks


def _write_paths(cfg, ladder, out: Path, seed: int) -> list[Path]:
    classes = cfg.class_params()
    mu = [c.mu for c in classes]
    files = []
    pdir = out / "paths"
    pdir.mkdir(parents=True, exist_ok=True)
    cell = 0
    for k in ladder.ks:
        for entry in ladder.row(k):
            count = min(cfg.paths_max_reps, cfg.reps)
            combined = None
            if cfg.paths_layout == "combined":
                target = pdir / f"cell{cell:03d}_k{k}_r{entry.r:g}.csv"
                combined = open(target, "w", newline="")
                files.append(target)
            try:
                for rep in range(count):
                    path = simulate_queues(classes, entry, T=entry.r * cfg.t_star, dt=1.0 / GRID_STEPS_PER_UNIT,
                                           rng=_rng(seed, cell, rep))
                    idle = idle_process(path, entry.Lam, mu, entry.r)
                    if combined is not None:
                        write_path_csv(combined, path, idle, rep=rep, header=rep == 0)
                    else:
                        target = pdir / f"cell{cell:03d}_k{k}_r{entry.r:g}_rep{rep:05d}.csv"
                        with open(target, "w", newline="") as fh:
                            write_path_csv(fh, path, idle)
                        files.append(target)
            finally:
                if combined is not None:
                    combined.close()
            cell += 1
    return files


def _suite_dict(s: SuiteResult) -> dict:
    return {"name": s.name, "passed": s.passed, "detail": s.detail, "metrics": s.metrics}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    """Run the configured mode and write ``results.csv`` / ``summary.json`` under ``out_dir``."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(cfg)
    start = time.perf_counter()
    summary = {"mode": cfg.mode, "seed": cfg.seed, "config": cfg.to_dict()}

    if cfg.mode in ("algebra-check", "skorohod-check"):
        if cfg.mode == "algebra-check":
            report.suites = algebra_suites(cfg.seed)
        else:
            rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(99,)))
            report.suites = [skorohod_suite(rng)]
        report.checks = {s.name: s.passed for s in report.suites}
        summary["suites"] = [_suite_dict(s) for s in report.suites]
    else:
        ladder = build_ladder(cfg)
        report.timings["ladder"] = time.perf_counter() - start
        cells = convergence_experiment(ladder, cfg.class_params(), cfg.reps, cfg.t_star, cfg.seed,
                                       oracle_reps=cfg.oracle_reps)
        report.timings["cells"] = time.perf_counter() - start
        report.cells = cells
        report.checks = ladder_checks(cfg, ladder, cells)
        results_path = out / "results.csv"
        write_results_csv(results_path, cells)
        report.files.append(results_path)
        summary["cells"] = [cell_dict(c) for c in cells]
        summary["max_ladder_drift_error"] = ladder.max_drift_error()
        if cfg.paths:
            report.files += _write_paths(cfg, ladder, out, cfg.seed)

    summary["checks"] = report.checks
    summary["passed"] = report.passed
    summary_path = out / "summary.json"
    write_summary_json(summary_path, summary)
    report.files.append(summary_path)
    report.timings["total"] = time.perf_counter() - start
    return report


def with_overrides(cfg: ExperimentConfig, seed=None, reps=None, out=None, paths=None) -> ExperimentConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if reps is not None:
        changes["reps"] = reps
    if out is not None:
        changes["output_dir"] = str(out)
    if paths:
        changes["paths"] = True
    return dataclasses.replace(cfg, **changes)


__all__ = ["RunReport", "build_ladder", "ladder_checks", "run_experiment", "with_overrides"]
