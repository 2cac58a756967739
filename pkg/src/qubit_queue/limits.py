"""Diffusion scaling, one-dimensional reflection, the reflected Brownian oracle,
and the convergence experiment that compares simulated workload with it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import kolmogi

from .engine import ClassParams, QueuePath, simulate_queues
from .errors import DegenerateConfiguration, DomainError, EmptySamples, GridMismatch, HorizonTooShort

__all__ = [
    "ScaledPath",
    "diffusion_scale",
    "skorohod_reflect",
    "complementarity_check",
    "complementarity_tolerance",
    "aggregate_variance",
    "RBMParams",
    "rbm_oracle",
    "rbm_cdf",
    "ComparisonReport",
    "compare_distributions",
    "ks_critical",
    "CellResult",
    "convergence_experiment",
    "fluid_deviation",
    "RESULT_COLUMNS",
    "write_results_csv",
    "write_summary_json",
]

GRID_STEPS_PER_UNIT = 64  # raw-time grid resolution used by the experiments


@dataclass(frozen=True, eq=False)
class ScaledPath:
    """``Vhat(t) = V(r t) / sqrt(r)`` and companions on a uniform scaled grid."""

    r: float
    grid: np.ndarray
    V: np.ndarray
    I: np.ndarray
    Bbar: np.ndarray
    A: np.ndarray | None = None
    V_low: np.ndarray | None = None


def diffusion_scale(path, r: float, t_max: float = 1.0, classes: Sequence[ClassParams] | None = None,
                    xi: float | None = None) -> ScaledPath:
    """Scale a :class:`QueuePath` (or an already scaled path) by ``r``.

    With ``classes`` the arrival counts are centered,
    ``Ahat_j(t) = (A_j(r t) - r m_j lam_j t) / sqrt(r)``.  The idle process
    uses ``Xi`` from the classes' speeds unless ``xi`` is given.
    """
    if not r >= 1:
        raise DomainError(f"r must be >= 1, got {r}")
    if isinstance(path, ScaledPath):
        return _rescale(path, r, t_max)
    grid = path.grid
    keep = grid <= r * t_max + 1e-9 * r
    if path.horizon < r * t_max - 1e-9 * r:
        raise HorizonTooShort(f"path ends at {path.horizon}, need {r * t_max}")
    sr = math.sqrt(r)
    xi = float(1.0 / np.sum(1.0 / path.speed)) if xi is None else xi
    A = None
    if classes is not None:
        drift = np.array([c.m * c.arrival_rate for c in classes])[:, None] * grid[keep]
        A = (path.A[:, keep] - drift) / sr
    return ScaledPath(
        r=float(r),
        grid=grid[keep] / r,
        V=path.V[keep] / sr,
        I=xi * path.idle_time[keep] / sr,
        Bbar=path.B[:, keep] / r,
        A=A,
        V_low=None if path.V_low is None else path.V_low[: int(keep.sum()) - 1] / sr,
    )


def _rescale(p: ScaledPath, r: float, t_max: float) -> ScaledPath:
    if p.grid[-1] < r * t_max - 1e-9 * r:
        raise HorizonTooShort(f"scaled path ends at {p.grid[-1]}, need {r * t_max}")
    keep = p.grid <= r * t_max + 1e-9 * r
    sr = math.sqrt(r)
    return ScaledPath(
        r=p.r * r,
        grid=p.grid[keep] / r,
        V=p.V[keep] / sr,
        I=p.I[keep] / sr,
        Bbar=p.Bbar[:, keep] / r,
        A=None if p.A is None else p.A[:, keep] / sr,
        V_low=None if p.V_low is None else p.V_low[: int(keep.sum()) - 1] / sr,
    )


def skorohod_reflect(x) -> tuple[np.ndarray, np.ndarray]:
    """One-dimensional reflection at 0 along the last axis.

    ``I(t) = max(0, max_{s <= t} -x(s))`` and ``V = x + I``.
    """
    x = np.asarray(x, dtype=float)
    I = np.maximum(np.maximum.accumulate(-x, axis=-1), 0.0)
    return x + I, I


def complementarity_tolerance(V, dt: float) -> float:
    """``2 * dt * max V``: first-order bound for the discretized Stieltjes sum."""
    V = np.asarray(V, dtype=float)
    return 2.0 * dt * float(np.max(V)) if V.size else 0.0


def complementarity_check(V, I, rule: str = "min", V_low=None) -> float:
    """Discretized ``int V dI``.

    ``rule="min"`` weights each increment of ``I`` by the smaller endpoint value
    of ``V`` on its cell; ``rule="right"`` uses the right endpoint.  Both give
    exactly 0 on reflected grid paths.  When the per-cell infimum ``V_low`` of
    a continuous-time path is known it is used as the weight instead (the
    lower Stieltjes sum), so a queue that empties and refills inside one cell
    is not mistaken for idling with work present.
    """
    V = np.asarray(V, dtype=float)
    I = np.asarray(I, dtype=float)
    if V.shape != I.shape:
        raise GridMismatch(f"V has shape {V.shape}, I has shape {I.shape}")
    if V.shape[-1] < 2:
        return 0.0
    dI = np.diff(I, axis=-1)
    if V_low is not None:
        V_low = np.asarray(V_low, dtype=float)
        if V_low.shape != dI.shape:
            raise GridMismatch(f"V_low has shape {V_low.shape}, expected {dI.shape}")
        weight = V_low
    elif rule == "min":
        weight = np.minimum(V[..., 1:], V[..., :-1])
    elif rule == "right":
        weight = V[..., 1:]
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return float(np.sum(weight * dI))


def aggregate_variance(classes: Sequence[ClassParams], lam=None, Lam=None) -> float:
    """``sum_j (m_j**2 lam_j (zeta_j**2 + alpha_j**2) + Lam_j beta_j**2) / mu_j**2``."""
    lam = [c.arrival_rate for c in classes] if lam is None else lam
    Lam = [c.service_rate for c in classes] if Lam is None else Lam
    total = 0.0
    for c, lj, Lj in zip(classes, lam, Lam):
        gamma_a = c.m**2 * lj * (c.zeta2 + c.alpha2)
        gamma_s = Lj * c.beta2
        total += (gamma_a + gamma_s) / c.mu**2
    return float(total)


@dataclass(frozen=True)
class RBMParams:
    theta: float
    sigma2: float
    v0: float = 0.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DegenerateConfiguration(f"variance must be > 0, got {self.sigma2}")
        if self.v0 < 0:
            raise DomainError(f"start must be >= 0, got {self.v0}")


def rbm_oracle(params: RBMParams, t: float, reps: int, rng: np.random.Generator,
               steps: int = 4096, bridge: bool = True, chunk: int = 256) -> np.ndarray:
    """Samples of reflected Brownian motion at time ``t``.

    Each path is a Gaussian random walk on ``steps`` cells.  With ``bridge``
    the minimum of the Brownian bridge inside every cell is sampled too and
    interleaved with the grid values before reflecting, which removes the
    bias from excursions below 0 between grid points.
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    if steps < 1 or not t > 0:
        raise DomainError("need t > 0 and at least one step")
    h = t / steps
    sd = math.sqrt(params.sigma2 * h)
    out = np.empty(reps)
    for start in range(0, reps, chunk):
        size = min(chunk, reps - start)
        inc = params.theta * h + sd * rng.standard_normal((size, steps))
        x = np.empty((size, steps + 1))
        x[:, 0] = params.v0
        np.cumsum(inc, axis=1, out=x[:, 1:])
        x[:, 1:] += params.v0
        if bridge:
            lo, hi = x[:, :-1], x[:, 1:]
            e = rng.standard_exponential((size, steps))
            low = 0.5 * (lo + hi - np.sqrt((hi - lo) ** 2 + 2.0 * params.sigma2 * h * e))
            path = np.empty((size, 2 * steps + 1))
            path[:, 0::2] = x
            path[:, 1::2] = low
        else:
            path = x
        V, _ = skorohod_reflect(path)
        out[start:start + size] = V[:, -1]
    return out


def rbm_cdf(y, params: RBMParams, t: float) -> np.ndarray:
    """Closed-form ``P(V(t) <= y)`` for reflected Brownian motion with drift."""
    y = np.asarray(y, dtype=float)
    s = math.sqrt(params.sigma2 * t)
    a = stats.norm.cdf((y - params.v0 - params.theta * t) / s)
    expo = np.exp(np.clip(2.0 * params.theta * y / params.sigma2, -700, 700))
    b = expo * stats.norm.cdf((-y - params.v0 - params.theta * t) / s)
    return np.where(y < 0, 0.0, a - b)


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value ``K_alpha * sqrt((n+m)/(n m))``."""
    return float(kolmogi(alpha) * math.sqrt((n + m) / (n * m)))


@dataclass(frozen=True)
class ComparisonReport:
    ks: float
    ks_critical_1pct: float
    n_a: int
    n_b: int
    mean_a: float
    var_a: float
    mean_b: float
    var_b: float

    @property
    def ks_pass(self) -> bool:
        return self.ks < self.ks_critical_1pct


def compare_distributions(a, b) -> ComparisonReport:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise EmptySamples("both sample sets must be nonempty")
    ks = float(stats.ks_2samp(a, b, method="asymp").statistic)  # only the statistic is used
    var = lambda s: float(np.var(s, ddof=1)) if s.size > 1 else 0.0
    return ComparisonReport(
        ks=ks,
        ks_critical_1pct=ks_critical(a.size, b.size),
        n_a=int(a.size),
        n_b=int(b.size),
        mean_a=float(np.mean(a)),
        var_a=var(a),
        mean_b=float(np.mean(b)),
        var_b=var(b),
    )


def fluid_deviation(scaled: ScaledPath) -> float:
    """``sup_t |sum_j Bbar_j(t) - t|`` over the scaled grid."""
    return float(np.max(np.abs(scaled.Bbar.sum(axis=0) - scaled.grid)))


RESULT_COLUMNS = (
    "regime_mode", "k_or_n", "r", "reps", "theta_k", "sigma2_k", "ks_stat", "ks_critical_1pct",
    "mean_sim", "mean_oracle", "var_sim", "var_oracle", "compl_residual", "fluid_sup_dev",
)


@dataclass
class CellResult:
    """One ladder cell.  ``compl_residual`` is the largest per-path residual and
    ``compl_excess`` the largest residual minus that path's tolerance."""

    regime_mode: str
    k_or_n: int
    r: float
    reps: int
    theta_k: float
    sigma2_k: float
    report: ComparisonReport
    compl_residual: float
    compl_excess: float
    fluid_sup_dev: float
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def compl_ok(self) -> bool:
        return self.compl_excess <= 0.0

    def row(self) -> dict:
        rep = self.report
        return {
            "regime_mode": self.regime_mode,
            "k_or_n": self.k_or_n,
            "r": self.r,
            "reps": self.reps,
            "theta_k": self.theta_k,
            "sigma2_k": self.sigma2_k,
            "ks_stat": rep.ks,
            "ks_critical_1pct": rep.ks_critical_1pct,
            "mean_sim": rep.mean_a,
            "mean_oracle": rep.mean_b,
            "var_sim": rep.var_a,
            "var_oracle": rep.var_b,
            "compl_residual": self.compl_residual,
            "fluid_sup_dev": self.fluid_sup_dev,
        }


ORACLE_KEY = 2**31 - 1


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def run_cell(classes, entry, reps: int, t_star: float, seed: int, cell: int,
             dt_raw: float = 1.0 / GRID_STEPS_PER_UNIT) -> tuple[np.ndarray, float, float, float]:
    """Simulate ``reps`` paths of one ladder entry.

    Returns the samples of ``Vhat(t_star)``, the largest complementarity
    residual, the largest residual-minus-tolerance, and the mean fluid deviation.
    """
    r = entry.r
    T = r * t_star
    mu = np.array([c.mu for c in classes])
    xi = float(1.0 / np.sum(mu / np.asarray(entry.Lam)))
    dt_scaled = dt_raw / r
    samples = np.empty(reps)
    worst, excess, fluid = 0.0, -math.inf, 0.0
    for rep in range(reps):
        path = simulate_queues(classes, entry, T=T, dt=dt_raw, rng=_rng(seed, cell, rep))
        sp = diffusion_scale(path, r, t_max=t_star, xi=xi)
        samples[rep] = sp.V[-1]
        res = complementarity_check(sp.V, sp.I, V_low=sp.V_low)
        worst = max(worst, res)
        excess = max(excess, res - complementarity_tolerance(sp.V, dt_scaled))
        fluid += fluid_deviation(sp)
    return samples, worst, excess, fluid / reps


def convergence_experiment(
    regime,
    classes: Sequence[ClassParams],
    reps: int,
    t_star: float = 1.0,
    seed: int = 0,
    oracle_reps: int | None = None,
    keep_samples: bool = False,
) -> list[CellResult]:
    """Compare simulated ``Vhat(t_star)`` with the reflected Brownian oracle, cell by cell.

    Cells are visited k-row by k-row (inner sweep over r).  Each k-row has
    its own oracle sample, drawn at the row's ``theta_k`` and the variance at
    the row's balanced rates; cell ``c`` replication ``i`` uses the seed
    stream ``(seed, c, i)``.
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    classes = list(classes)
    oracle_reps = reps if oracle_reps is None else oracle_reps
    results = []
    cell = 0
    for k in regime.ks:
        row = regime.row(k)
        head = row[0]
        m = np.array([c.m for c in classes])
        balanced = m * np.array(head.lam)
        sigma2 = aggregate_variance(classes, head.lam, balanced)
        if sigma2 <= 0:
            raise DegenerateConfiguration(f"variance vanishes at k={k}; nothing to compare")
        oracle = rbm_oracle(RBMParams(head.theta_k, sigma2), t_star, oracle_reps, _rng(seed, ORACLE_KEY, k))
        for entry in row:
            samples, worst, excess, fluid = run_cell(classes, entry, reps, t_star, seed, cell)
            results.append(CellResult(
                regime_mode=regime.mode.value,
                k_or_n=k,
                r=entry.r,
                reps=reps,
                theta_k=entry.theta_k,
                sigma2_k=sigma2,
                report=compare_distributions(samples, oracle),
                compl_residual=worst,
                compl_excess=excess,
                fluid_sup_dev=fluid,
                samples=samples if keep_samples else None,
            ))
            cell += 1
    return results


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(path, results: Sequence[CellResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for res in results:
            row = res.row()
            writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def cell_dict(res: CellResult) -> dict:
    d = res.row()
    d["compl_ok"] = res.compl_ok
    d["ks_pass_1pct"] = res.report.ks_pass
    return d

