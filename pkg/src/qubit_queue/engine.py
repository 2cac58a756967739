"""Renewal-reward arrivals and an event-driven multiclass work-conserving queue.

Service model: a class-``j`` packet of length ``v`` (mean ``1/mu_j``) consumes
``v * mu_j / Lam_j`` units of class-``j`` busy time, i.e. the class is served
at speed ``Lam_j / mu_j`` while it holds the whole server.  The service clock
``S_j(h)`` counts packets whose cumulative busy-time requirement is ``<= h``,
so departures are ``D_j(t) = S_j(B_j(t))`` and ``S_j`` has rate ``Lam_j``.

Capacity is shared by generalized processor sharing: nonempty classes split
the server in proportion to their speeds ``Lam_j / mu_j``; the shares sum to
one whenever any class is nonempty.  Within a class packets leave in FIFO
order.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import BatchLaw, Law
from .errors import ConfigError, DomainError

__all__ = [
    "ClassParams",
    "ArrivalPath",
    "QueuePath",
    "sample_dsrrrf",
    "merge_arrivals",
    "sample_service_counts",
    "service_clock",
    "simulate_queues",
    "workload",
    "idle_process",
    "write_path_csv",
]


@dataclass(frozen=True)
class ClassParams:
    """One user class.

    ``arrival_rate`` is ``lambda_j``; inter-arrival times are ``inter_arrival``
    scaled to mean ``1/lambda_j``.  Packet lengths follow ``packet`` scaled to
    mean ``1/mu``.  ``service_rate`` (``Lam_j``) defaults to ``mu``.
    """

    j: int
    arrival_rate: float
    inter_arrival: Law
    batch: BatchLaw
    mu: float
    packet: Law
    service_rate: float | None = None

    def __post_init__(self):
        if not self.arrival_rate >= 0 or not math.isfinite(self.arrival_rate):
            raise DomainError(f"class {self.j}: arrival rate must be >= 0")
        if not self.mu > 0:
            raise DomainError(f"class {self.j}: mu must be > 0")
        if self.service_rate is None:
            object.__setattr__(self, "service_rate", float(self.mu))
        if not self.service_rate > 0:
            raise DomainError(f"class {self.j}: service rate must be > 0")

    @property
    def m(self) -> float:
        return float(self.batch.mean)

    @property
    def alpha2(self) -> float:
        return self.inter_arrival.scv

    @property
    def zeta2(self) -> float:
        return self.batch.scv

    @property
    def beta2(self) -> float:
        return self.packet.scv

    @property
    def speed(self) -> float:
        return self.service_rate / self.mu

    def with_rates(self, arrival_rate=None, service_rate=None) -> "ClassParams":
        changes = {}
        if arrival_rate is not None:
            changes["arrival_rate"] = float(arrival_rate)
        if service_rate is not None:
            changes["service_rate"] = float(service_rate)
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ArrivalPath:
    """Batch arrival epochs, sorted by time; ``marks`` are optional sphere points."""

    times: np.ndarray
    classes: np.ndarray
    sizes: np.ndarray
    marks: tuple | None = None

    def __post_init__(self):
        for name, dtype in (("times", float), ("classes", np.int64), ("sizes", np.int64)):
            arr = np.asarray(getattr(self, name), dtype=dtype).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.times.size == self.classes.size == self.sizes.size):
            raise DomainError("arrival arrays differ in length")
        if np.any(self.sizes < 1):
            raise DomainError("batch sizes must be >= 1")
        if np.any(np.diff(self.times) < 0):
            raise DomainError("arrival times must be sorted")

    def of_class(self, j: int) -> "ArrivalPath":
        sel = self.classes == j
        marks = None if self.marks is None else tuple(m for m, s in zip(self.marks, sel) if s)
        return ArrivalPath(self.times[sel], self.classes[sel], self.sizes[sel], marks)

    def counts(self, t, j: int | None = None) -> np.ndarray:
        """``A_j(t)``: packets arrived in ``(0, t]`` (right-continuous)."""
        path = self if j is None else self.of_class(j)
        cum = np.concatenate([[0], np.cumsum(path.sizes)])
        return cum[np.searchsorted(path.times, np.asarray(t, dtype=float), side="right")]


def _renewal_times(rate: float, law: Law, T: float, rng) -> np.ndarray:
    if rate == 0 or T <= 0:
        return np.empty(0)
    mean = 1.0 / rate
    if law.family == "deterministic":
        count = int(math.floor(T * rate)) + 2
        times = np.arange(1, count + 1) * mean
        return times[times <= T]
    expected = T * rate
    chunk = int(expected + 6 * math.sqrt(expected * (1 + law.scv)) + 16)
    parts, last = [], 0.0
    while last <= T:
        gaps = law.sample(rng, chunk, mean)
        part = last + np.cumsum(gaps)
        parts.append(part)
        last = part[-1]
    times = np.concatenate(parts)
    return times[times <= T]


def sample_dsrrrf(
    params: ClassParams,
    T: float,
    rng: np.random.Generator,
    marks=None,
) -> ArrivalPath:
    """Renewal batch arrivals of one class on ``(0, T]``.

    ``marks=(start, step)`` attaches a geodesic-walk location (a
    ``SpherePoint``) to every batch; marks never affect the counts.
    """
    if not T > 0:
        raise ConfigError(f"horizon must be > 0, got {T}")
    times = _renewal_times(params.arrival_rate, params.inter_arrival, T, rng)
    sizes = params.batch.sample(rng, times.size)
    walk = None
    if marks is not None:
        from .fields import geodesic_walk_step

        point, step = marks
        walk = []
        for _ in range(times.size):
            point = geodesic_walk_step(point, step, rng)
            walk.append(point)
        walk = tuple(walk)
    return ArrivalPath(times, np.full(times.size, params.j), sizes, walk)


def merge_arrivals(paths: Sequence[ArrivalPath]) -> ArrivalPath:
    times = np.concatenate([p.times for p in paths]) if paths else np.empty(0)
    classes = np.concatenate([p.classes for p in paths]) if paths else np.empty(0)
    sizes = np.concatenate([p.sizes for p in paths]) if paths else np.empty(0)
    order = np.argsort(times, kind="stable")
    marks = None
    if paths and all(p.marks is not None for p in paths):
        flat = [m for p in paths for m in p.marks]
        marks = tuple(flat[i] for i in order)
    return ArrivalPath(times[order], classes[order], sizes[order], marks)


def service_clock(params: ClassParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Busy-time boundaries ``tau_k``: packet ``k`` completes once ``B_j`` reaches ``tau_k``."""
    lengths = params.packet.sample(rng, count, 1.0 / params.mu)
    return np.cumsum(lengths / params.speed)


def sample_service_counts(params: ClassParams, h: float, rng: np.random.Generator) -> int:
    """``S_j(h)``: packets completed within ``h`` units of busy time."""
    if h < 0:
        raise DomainError(f"busy time must be >= 0, got {h}")
    if h == 0:
        return 0
    rate = params.service_rate
    chunk = int(h * rate + 6 * math.sqrt(h * rate * (1 + params.beta2)) + 16)
    total, last = 0, 0.0
    while True:
        tau = last + service_clock(params, chunk, rng)
        done = int(np.searchsorted(tau, h, side="right"))
        total += done
        if done < chunk:
            return total
        last = tau[-1]


@dataclass(frozen=True, eq=False)
class QueuePath:
    """Grid samples of one run; per-class arrays have shape ``(J, len(grid))``.

    ``V_low[i]`` is the infimum of ``V`` over the cell ``[grid[i], grid[i+1]]``,
    taken over every event inside it.
    """

    grid: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    D: np.ndarray
    B: np.ndarray
    W: np.ndarray
    V: np.ndarray
    mu: np.ndarray
    speed: np.ndarray
    V_low: np.ndarray | None = None
    events: dict | None = None

    @property
    def J(self) -> int:
        return self.Q.shape[0]

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def idle_time(self) -> np.ndarray:
        """``t - sum_j B_j(t)``: cumulative unused capacity in time units."""
        return self.grid - self.B.sum(axis=0)


def _grid(T: float, dt: float) -> np.ndarray:
    steps = int(math.floor(T / dt + 1e-9))
    return np.arange(steps + 1) * dt


def simulate_queues(
    classes: Sequence[ClassParams],
    entry=None,
    T: float = 1.0,
    dt: float = 1.0 / 64,
    rng: np.random.Generator | None = None,
    q0: Sequence[int] | None = None,
    arrivals: ArrivalPath | None = None,
    keep_events: bool = False,
) -> QueuePath:
    """Event-driven simulation on ``[0, T]``, sampled on the grid ``k * dt``.

    ``entry`` (a regime entry) overrides the classes' arrival and service
    rates.  ``arrivals`` replaces the sampled arrival stream.
    """
    if not T > 0 or not math.isfinite(T):
        raise ConfigError(f"horizon must be > 0, got {T}")
    if not dt > 0 or dt > T:
        raise ConfigError(f"grid step must lie in (0, T], got {dt}")
    rng = rng if rng is not None else np.random.default_rng()
    classes = list(classes)
    if entry is not None:
        classes = [c.with_rates(entry.lam[i], entry.Lam[i]) for i, c in enumerate(classes)]
    J = len(classes)
    q0 = np.zeros(J, dtype=np.int64) if q0 is None else np.asarray(q0, dtype=np.int64)
    if q0.shape != (J,) or np.any(q0 < 0):
        raise ConfigError("initial queue lengths must be J nonnegative integers")

    if arrivals is None:
        arrivals = merge_arrivals([sample_dsrrrf(c, T, rng) for c in classes])
    index = {c.j: i for i, c in enumerate(classes)}
    a_times = arrivals.times.tolist()
    a_class = [index[int(j)] for j in arrivals.classes]
    a_size = arrivals.sizes.tolist()
    per_class_total = q0.copy()
    np.add.at(per_class_total, a_class, arrivals.sizes)
    clocks = [service_clock(c, int(per_class_total[i]), rng).tolist() for i, c in enumerate(classes)]
    speed = [c.speed for c in classes]

    Q = q0.tolist()
    D = [0] * J
    B = [0.0] * J
    t = 0.0
    log_t, log_Q, log_D, log_B = [0.0], [tuple(Q)], [tuple(D)], [tuple(B)]
    ia, n_arr = 0, len(a_times)
    inf = math.inf
    while True:
        t_arr = a_times[ia] if ia < n_arr else inf
        active = [j for j in range(J) if Q[j] > 0]
        t_done, j_done = inf, -1
        if active:
            total = sum(speed[j] for j in active)
            share = {j: speed[j] / total for j in active}
            for j in active:
                tc = t + max(clocks[j][D[j]] - B[j], 0.0) / share[j]
                if tc < t_done:
                    t_done, j_done = tc, j
        t_next = min(t_arr, t_done)
        if t_next > T:
            if active:
                for j in active:
                    B[j] += share[j] * (T - t)
                log_t.append(T)
                log_Q.append(tuple(Q))
                log_D.append(tuple(D))
                log_B.append(tuple(B))
            break
        if active:
            for j in active:
                B[j] += share[j] * (t_next - t)
        t = t_next
        if t_done <= t_arr:
            B[j_done] = clocks[j_done][D[j_done]]  # land exactly on the clock boundary
            D[j_done] += 1
            Q[j_done] -= 1
        else:
            Q[a_class[ia]] += a_size[ia]
            ia += 1
        log_t.append(t)
        log_Q.append(tuple(Q))
        log_D.append(tuple(D))
        log_B.append(tuple(B))

    ev_t = np.array(log_t)
    ev_Q = np.array(log_Q, dtype=np.int64).T
    ev_D = np.array(log_D, dtype=np.int64).T
    ev_B = np.array(log_B).T
    grid = _grid(T, dt)
    idx = np.searchsorted(ev_t, grid, side="right") - 1
    Qg = ev_Q[:, idx]
    Dg = ev_D[:, idx]
    Bg = np.vstack([np.interp(grid, ev_t, ev_B[j]) for j in range(J)])
    Ag = np.vstack([arrivals.counts(grid, c.j) for c in classes])
    mu = np.array([c.mu for c in classes])
    W = Qg / mu[:, None]
    V = W.sum(axis=0)
    ev_V = (ev_Q / mu[:, None]).sum(axis=0)
    V_low = np.minimum(V[:-1], V[1:])
    cell = np.searchsorted(grid, ev_t, side="left")  # event in (grid[i-1], grid[i]] -> i
    inside = (cell >= 1) & (cell < grid.size)
    np.minimum.at(V_low, cell[inside] - 1, ev_V[inside])
    events = None
    if keep_events:
        events = {"t": ev_t, "Q": ev_Q, "D": ev_D, "B": ev_B, "clocks": [np.array(c) for c in clocks]}
    return QueuePath(grid, Qg, Ag, Dg, Bg, W, V, mu, np.array(speed), V_low, events)


def workload(path: QueuePath, mu: Sequence[float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-class workloads ``W_j = Q_j / mu_j`` and their total ``V``."""
    mu = path.mu if mu is None else np.asarray(mu, dtype=float)
    W = path.Q / mu[:, None]
    return W, W.sum(axis=0)


def idle_process(path: QueuePath, Lam: Sequence[float], mu: Sequence[float], r: float) -> np.ndarray:
    """Scaled idle process on the scaled grid ``path.grid / r``.

    ``I = Xi * sqrt(r) * (t - sum_j Bbar_j(t))`` with ``Bbar_j(t) = B_j(r t) / r``
    and ``Xi = (sum_j mu_j / Lam_j)**-1``.
    """
    speed = np.asarray(Lam, dtype=float) / np.asarray(mu, dtype=float)
    xi = 1.0 / np.sum(1.0 / speed)
    return xi * path.idle_time / math.sqrt(r)


def write_path_csv(file, path: QueuePath, idle: np.ndarray | None = None, rep: int | None = None,
                   header: bool = True) -> None:
    """Rows ``time, class, Q, D, B, W, V, I`` (plus ``rep`` when given), one per grid point and class."""
    idle = path.idle_time if idle is None else idle
    writer = csv.writer(file, lineterminator="\n")
    cols = ["time", "class", "Q", "D", "B", "W", "V", "I"]
    if header:
        writer.writerow((["rep"] if rep is not None else []) + cols)
    for i, t in enumerate(path.grid):
        for j in range(path.J):
            row = [repr(float(t)), j, int(path.Q[j, i]), int(path.D[j, i]), repr(float(path.B[j, i])),
                   repr(float(path.W[j, i])), repr(float(path.V[i])), repr(float(idle[i]))]
            writer.writerow(([rep] if rep is not None else []) + row)
