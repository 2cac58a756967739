"""Sphere geometry, rate fields over sphere regions, and heavy-traffic ladders.

Points live on the state sphere of ``n`` qubits.  With ``N = 2**n`` angles the
amplitude vector has ``N - 1`` real entries and one complex entry, so the
points sit on the unit sphere ``S^N`` inside ``R^(N+1)``.  Distances and caps
are taken in that real embedding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import betainc, beta, gamma

from .errors import DimensionMismatch, DomainError, InfeasibleRates, InvalidRadius
from .sphere import QubitState, amplitudes_from_angles, to_angles

__all__ = [
    "SpherePoint",
    "Cap",
    "cap_area",
    "cap_ladder",
    "embed",
    "from_embedding",
    "geodesic_distance",
    "geodesic_walk_step",
    "RateField",
    "rate_at",
    "LimitPoint",
    "drift_mu",
    "default_theta_sequence",
    "RegimeMode",
    "RegimeEntry",
    "RegimeLadder",
    "build_regime_fixed_n",
    "build_regime_varying_n",
    "limit_rates",
]


@dataclass(frozen=True, eq=False)
class SpherePoint:
    n: int
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if self.n < 1:
            raise DomainError(f"level must be >= 1, got {self.n}")
        if theta.size != 2**self.n:
            raise DimensionMismatch(f"expected {2**self.n} angles for n={self.n}, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise DomainError("angles must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def uniform_center(cls, n: int) -> "SpherePoint":
        """All polar angles pi/4, phase 0: a generic interior point."""
        theta = np.full(2**n, math.pi / 4)
        theta[-1] = 0.0
        return cls(n, theta)

    def state(self) -> QubitState:
        return QubitState(self.n, amplitudes_from_angles(self.theta))


def embed(p: SpherePoint) -> np.ndarray:
    """Real coordinates in ``R^(N+1)``: the ``N-1`` real amplitudes, then Re/Im of the last."""
    amps = amplitudes_from_angles(p.theta)
    return np.concatenate([amps[:-1].real, [amps[-1].real, amps[-1].imag]])


def from_embedding(y: np.ndarray, n: int) -> SpherePoint:
    """Angles of a unit vector in ``R^(N+1)``; polar angles land in ``[0, pi]``."""
    y = np.asarray(y, dtype=float)
    N = 2**n
    if y.size != N + 1:
        raise DimensionMismatch(f"expected {N + 1} coordinates, got {y.size}")
    y = y / np.linalg.norm(y)
    tail = np.sqrt(np.cumsum((y**2)[::-1])[::-1])  # tail[k] = |y[k:]|
    theta = np.empty(N)
    theta[:-1] = np.arctan2(tail[1:N], y[: N - 1])
    theta[-1] = math.atan2(y[N], y[N - 1]) % (2 * math.pi)
    return SpherePoint(n, theta)


def geodesic_distance(p: SpherePoint, q: SpherePoint) -> float:
    if p.n != q.n:
        raise DimensionMismatch(f"levels differ: {p.n} vs {q.n}")
    c = float(np.dot(embed(p), embed(q)))
    return math.acos(min(1.0, max(-1.0, c)))


@dataclass(frozen=True, eq=False)
class Cap:
    center: SpherePoint
    geodesic_radius: float
    area: float

    def contains(self, p: SpherePoint, tol: float = 1e-12) -> bool:
        return geodesic_distance(self.center, p) <= self.geodesic_radius + tol


def cap_area(n: int, radius: float) -> float:
    """Surface measure of a geodesic cap of ``radius`` on ``S^d``, ``d = 2**n``.

    ``|S^(d-1)| * int_0^rho sin(t)^(d-1) dt``, with the integral written as a
    regularized incomplete beta function (valid for ``rho <= pi/2``).
    """
    if not 0 < radius <= math.pi / 2:
        raise InvalidRadius(f"radius must lie in (0, pi/2], got {radius}")
    d = 2**n
    sphere_lower = 2 * math.pi ** (d / 2) / gamma(d / 2)
    integral = 0.5 * beta(d / 2, 0.5) * betainc(d / 2, 0.5, math.sin(radius) ** 2)
    return float(sphere_lower * integral)


def cap_ladder(center: SpherePoint, rho0: float, K: int) -> list[Cap]:
    """``K`` nested caps around ``center`` with radii ``rho0 * 2**-(k-1)``."""
    if not (0 < rho0 <= math.pi / 4) or not math.isfinite(rho0):
        raise InvalidRadius(f"rho0 must lie in (0, pi/4], got {rho0}")
    if K < 1:
        raise InvalidRadius(f"ladder length must be >= 1, got {K}")
    caps = []
    for k in range(K):
        rho = rho0 * 2.0**-k
        caps.append(Cap(center, rho, cap_area(center.n, rho)))
    return caps


def geodesic_walk_step(p: SpherePoint, step: float, rng: np.random.Generator) -> SpherePoint:
    """Move ``step`` radians along a uniformly random great circle through ``p``."""
    if step < 0:
        raise DomainError(f"step must be >= 0, got {step}")
    if step == 0:
        return p
    x = embed(p)
    g = rng.standard_normal(x.size)
    u = g - np.dot(g, x) * x
    u /= np.linalg.norm(u)
    return from_embedding(math.cos(step) * x + math.sin(step) * u, p.n)


@dataclass(frozen=True)
class RateField:
    """Per-class arrival rate and inter-arrival SCV as functions of sphere angles.

    ``family="constant"``: ``lam[j]`` everywhere.
    ``family="affine-in-angles"``: ``max(0, lam[j] + sum_i coef[j][i] * theta_(i+1))``.

    ``alpha2`` is constant per class.  The Lipschitz bound ``lipschitz`` holds
    for the sup-norm distance between angle vectors.
    """

    family: str
    lam: tuple
    alpha2: tuple
    coef: tuple = ()

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        alpha2 = tuple(float(v) for v in self.alpha2)
        if len(lam) == 0 or len(alpha2) != len(lam):
            raise DimensionMismatch("lam and alpha2 need one entry per class")
        if any(a < 0 for a in alpha2):
            raise DomainError("alpha2 must be >= 0")
        if self.family == "constant":
            if any(v < 0 for v in lam):
                raise DomainError("constant rates must be >= 0")
            coef = tuple(() for _ in lam)
        elif self.family == "affine-in-angles":
            coef = tuple(tuple(float(c) for c in row) for row in self.coef)
            if len(coef) != len(lam):
                raise DimensionMismatch("affine field needs one coefficient row per class")
        else:
            raise DomainError(f"unknown field family {self.family!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha2", alpha2)
        object.__setattr__(self, "coef", coef)

    @property
    def J(self) -> int:
        return len(self.lam)

    @property
    def lipschitz(self) -> float:
        return max((sum(abs(c) for c in row) for row in self.coef), default=0.0)

    @property
    def support(self) -> int:
        """Number of leading angles the field reads."""
        return max((len(row) for row in self.coef), default=0)

    def eval_angles(self, j: int, theta: Sequence[float]) -> tuple[float, float]:
        row = self.coef[j]
        if len(row) > len(theta):
            raise DimensionMismatch(f"field reads {len(row)} angles, point has {len(theta)}")
        value = self.lam[j] + sum(c * float(t) for c, t in zip(row, theta))
        return max(0.0, value), self.alpha2[j]

    def eval(self, j: int, p: SpherePoint) -> tuple[float, float]:
        return self.eval_angles(j, p.theta)


def rate_at(field_: RateField, cap: Cap, j: int) -> tuple[float, float]:
    """Field value at the cap center."""
    return field_.eval(j, cap.center)


@dataclass(frozen=True)
class LimitPoint:
    """A point of the infinite-dimensional sphere given by its angle sequence.

    Angle ``i`` (1-based) is ``prefix[i-1]`` for ``i <= len(prefix)`` and
    ``tail_angle`` afterwards, so every amplitude is nonzero.  The level-``n``
    point keeps the first ``2**n`` amplitudes and renormalizes them.
    """

    prefix: tuple
    tail_angle: float = math.pi / 4

    def __post_init__(self):
        prefix = tuple(float(a) for a in self.prefix)
        if not all(0 < a < math.pi / 2 for a in prefix + (self.tail_angle,)):
            raise DomainError("limit-point angles must lie in (0, pi/2)")
        object.__setattr__(self, "prefix", prefix)

    def angle(self, i: int) -> float:
        return self.prefix[i - 1] if i <= len(self.prefix) else self.tail_angle

    def angles(self, count: int) -> np.ndarray:
        return np.array([self.angle(i) for i in range(1, count + 1)])

    def truncate(self, n: int) -> SpherePoint:
        N = 2**n
        # the real amplitude sequence: psi_k = prod_{i<k} sin(t_i) cos(t_k)
        th = self.angles(N)
        prefix = np.concatenate([[1.0], np.cumprod(np.sin(th[:-1]))])
        amps = prefix * np.cos(th)
        amps /= np.linalg.norm(amps)
        theta = to_angles(QubitState(n, amps.astype(complex))).theta
        return SpherePoint(n, theta)


def drift_mu(m, mu, lam, Lam) -> float:
    """``sum_j (m_j lam_j - Lam_j) / mu_j``."""
    m, mu, lam, Lam = (np.asarray(v, dtype=float) for v in (m, mu, lam, Lam))
    if np.any(m <= 0) or np.any(mu <= 0):
        raise DomainError("batch means and service rates must be > 0")
    return float(np.sum((m * lam - Lam) / mu))


def default_theta_sequence(theta: float, ks: Sequence[int]) -> list[float]:
    return [theta * (1.0 - 2.0 ** (-k)) for k in ks]


class RegimeMode(enum.Enum):
    FIXED_N = "fixed-n"
    VARYING_N = "varying-n"


@dataclass(frozen=True)
class RegimeEntry:
    r: float
    k: int
    cap: Cap
    lam: tuple
    alpha2: tuple
    Lam: tuple
    mu_drift: float
    theta_k: float


@dataclass
class RegimeLadder:
    mode: RegimeMode
    entries: list = field(default_factory=list)
    theta: float = 0.0

    @property
    def ks(self) -> list[int]:
        return sorted({e.k for e in self.entries})

    @property
    def rs(self) -> list[float]:
        return sorted({e.r for e in self.entries})

    def row(self, k: int) -> list[RegimeEntry]:
        return sorted((e for e in self.entries if e.k == k), key=lambda e: e.r)

    def max_drift_error(self) -> float:
        return max(abs(math.sqrt(e.r) * e.mu_drift - e.theta_k) for e in self.entries)


def _check_ladder(rs, ks, label):
    if len(rs) == 0 or len(ks) == 0:
        raise DomainError("ladders must be nonempty")
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise DomainError("r ladder must be strictly increasing")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise DomainError(f"{label} ladder must be strictly increasing")
    if any(r < 1 for r in rs):
        raise DomainError("r values must be >= 1")


def _entry(field_, m, mu, cap, r, k, theta_k) -> RegimeEntry:
    J = field_.J
    lam, alpha2 = zip(*(field_.eval(j, cap.center) for j in range(J)))
    lam_arr = np.array(lam)
    # each class absorbs an equal share of the drift theta_k / sqrt(r)
    Lam = m * lam_arr - mu * theta_k / (J * math.sqrt(r))
    if np.any(Lam <= 0):
        bad = int(np.flatnonzero(Lam <= 0)[0])
        raise InfeasibleRates(f"service rate of class {bad} would be {Lam[bad]:.3g} at r={r}, k={k}")
    return RegimeEntry(
        r=float(r),
        k=int(k),
        cap=cap,
        lam=tuple(float(v) for v in lam),
        alpha2=tuple(float(v) for v in alpha2),
        Lam=tuple(float(v) for v in Lam),
        mu_drift=drift_mu(m, mu, lam_arr, Lam),
        theta_k=float(theta_k),
    )


def build_regime_fixed_n(
    field_: RateField,
    m: Sequence[float],
    mu: Sequence[float],
    theta: float,
    r_ladder: Sequence[float],
    caps: Sequence[Cap],
    theta_k: Sequence[float] | None = None,
) -> RegimeLadder:
    """Heavy-traffic ladder at a fixed level; ``caps[k-1]`` is region ``k``."""
    ks = list(range(1, len(caps) + 1))
    _check_ladder(list(r_ladder), ks, "k")
    thetas = list(theta_k) if theta_k is not None else default_theta_sequence(theta, ks)
    if len(thetas) != len(caps):
        raise DimensionMismatch("need one theta_k per cap")
    m, mu = np.asarray(m, dtype=float), np.asarray(mu, dtype=float)
    if m.size != field_.J or mu.size != field_.J:
        raise DimensionMismatch("m and mu need one entry per class")
    entries = [
        _entry(field_, m, mu, cap, r, k, th)
        for k, cap, th in zip(ks, caps, thetas)
        for r in r_ladder
    ]
    return RegimeLadder(RegimeMode.FIXED_N, entries, float(theta))


def build_regime_varying_n(
    field_: RateField,
    limit: LimitPoint,
    m: Sequence[float],
    mu: Sequence[float],
    theta: float,
    r_ladder: Sequence[float],
    n_ladder: Sequence[int],
    rho0: float = math.pi / 8,
    theta_n: Sequence[float] | None = None,
) -> RegimeLadder:
    """Ladder whose second index is the qubit count ``n``.

    Level ``n`` uses the truncation of ``limit`` as cap center and a cap of
    radius ``rho0 * 2**-(i)`` for the ``i``-th level in the ladder.
    """
    ns = list(n_ladder)
    _check_ladder(list(r_ladder), ns, "n")
    if ns[0] < 1:
        raise DomainError("levels must be >= 1")
    if not 0 < rho0 <= math.pi / 4:
        raise InvalidRadius(f"rho0 must lie in (0, pi/4], got {rho0}")
    thetas = list(theta_n) if theta_n is not None else default_theta_sequence(theta, ns)
    if len(thetas) != len(ns):
        raise DimensionMismatch("need one theta_n per level")
    m, mu = np.asarray(m, dtype=float), np.asarray(mu, dtype=float)
    if m.size != field_.J or mu.size != field_.J:
        raise DimensionMismatch("m and mu need one entry per class")
    entries = []
    for i, (n, th) in enumerate(zip(ns, thetas)):
        center = limit.truncate(n)
        rho = rho0 * 2.0**-i
        cap = Cap(center, rho, cap_area(n, rho))
        entries += [_entry(field_, m, mu, cap, r, n, th) for r in r_ladder]
    return RegimeLadder(RegimeMode.VARYING_N, entries, float(theta))


def limit_rates(field_: RateField, limit: LimitPoint) -> list[tuple[float, float]]:
    """Field values at the limit point itself (using its leading angles)."""
    theta = limit.angles(max(field_.support, 1))
    return [field_.eval_angles(j, theta) for j in range(field_.J)]

