"""Invariant suites for the sphere algebra and the reflection map.

Each suite takes the implementation under test as an argument so that
deliberately broken variants can be fed through the same gate.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateWarning
from .limits import complementarity_check, skorohod_reflect
from .sphere import (
    OpKind,
    QubitState,
    SphericalAngles,
    amplitudes_from_angles,
    channel_gain,
    coeff_map,
    from_angles,
    op_combine,
    to_angles,
)

LOW, HIGH = 0.05, math.pi / 2 - 0.05


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    metrics: dict = field(default_factory=dict)


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - start
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def normalization_suite(rng, draws: int = 1000, ns=range(1, 7), tol: float = 1e-12,
                        amplitudes=amplitudes_from_angles) -> SuiteResult:
    """Unit norm for arbitrary real angles, including ones far outside the nominal domain."""
    worst = 0.0
    for n in ns:
        theta = rng.uniform(-4 * math.pi, 4 * math.pi, size=(draws, 2**n))
        amps = amplitudes(theta)
        worst = max(worst, float(np.max(np.abs(np.sum(np.abs(amps) ** 2, axis=-1) - 1.0))))
    return SuiteResult("normalization", worst < tol, f"max |norm^2 - 1| = {worst:.3e}", metrics={"max_err": worst})


def _domain_angles(rng, n):
    return SphericalAngles(n, rng.uniform(LOW, HIGH, size=2**n))


@_timed
def consistency_suite(rng, pairs: int = 1000, ns=range(1, 5), tol: float = 1e-9,
                      coeff: Callable = coeff_map) -> SuiteResult:
    """Closed-form coefficients against the angle-space rule, every operation and level."""
    worst = 0.0
    failures = 0
    for kind in OpKind:
        for n in ns:
            for _ in range(pairs):
                a, b = _domain_angles(rng, n), _domain_angles(rng, n)
                phi, psi = from_angles(a), from_angles(b)
                want = amplitudes_from_angles(op_combine(kind, a, b).theta)
                got = coeff(kind, phi, psi, a, b).amplitudes
                err = float(np.max(np.abs(got - want)))
                worst = max(worst, err)
                failures += int(err >= tol)
    return SuiteResult(
        "consistency", failures == 0, f"{failures} mismatches, max error {worst:.3e}",
        metrics={"max_err": worst, "failures": failures},
    )


def nondegenerate_angles(rng, n, floor: float = 1e-4) -> SphericalAngles:
    """Interior draw whose every prefix sine product stays above ``floor``."""
    while True:
        polar = rng.uniform(LOW, HIGH, size=2**n - 1)
        if np.prod(np.sin(polar)) > floor:
            phase = rng.uniform(LOW, 2 * math.pi - LOW)
            return SphericalAngles(n, np.append(polar, phase))


@_timed
def round_trip_suite(rng, draws: int = 1000, ns=range(1, 5), tol: float = 1e-10) -> SuiteResult:
    worst = 0.0
    for n in ns:
        for _ in range(draws):
            a = nondegenerate_angles(rng, n)
            with warnings.catch_warnings():
                warnings.simplefilter("error", DegenerateWarning)
                back = to_angles(from_angles(a)).theta
            worst = max(worst, float(np.max(np.abs(back - a.theta))))
    return SuiteResult("round_trip", worst < tol, f"max angle error {worst:.3e}", metrics={"max_err": worst})


def random_state(rng, n) -> QubitState:
    z = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return QubitState(n, z / np.linalg.norm(z))


@_timed
def channel_suite(rng, pairs: int = 1000, self_tol: float = 1e-12, orth_tol: float = 1e-10) -> SuiteResult:
    worst_self = worst_orth = 0.0
    for i in range(pairs):
        n = 1 + i % 4
        phi, psi = random_state(rng, n), random_state(rng, n)
        worst_self = max(worst_self, abs(channel_gain(phi, phi) - 1.0))
        g = channel_gain(phi, psi)
        residual = psi.amplitudes - phi.amplitudes * g
        worst_orth = max(worst_orth, abs(np.vdot(phi.amplitudes, residual)))
    ok = worst_self < self_tol and worst_orth < orth_tol
    return SuiteResult(
        "channel", ok, f"max |G(phi,phi) - 1| = {worst_self:.3e}, max |<phi, psi - phi G>| = {worst_orth:.3e}",
        metrics={"self_err": worst_self, "orth_err": worst_orth},
    )


def brute_force_reflect(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """O(m^2) reference: the regulator at ``t`` scans the whole prefix."""
    I = np.empty_like(x)
    for t in range(x.size):
        I[t] = max(0.0, float(np.max(-x[: t + 1])))
    return x + I, I


def random_netput(rng, max_points: int = 1000) -> np.ndarray:
    """Piecewise-linear path with random kinks, started at a nonnegative level."""
    m = int(rng.integers(2, max_points + 1))
    kinks = int(rng.integers(1, min(m, 20) + 1))
    knots_t = np.sort(np.concatenate([[0, m - 1], rng.integers(0, m, size=kinks)]))
    knots_x = np.cumsum(rng.normal(0, 3, size=knots_t.size))
    knots_x += abs(knots_x[0]) * rng.random() - knots_x[0]  # x(0) in [0, |x0|]
    x = np.interp(np.arange(m), knots_t, knots_x)
    return x + rng.normal(0, 0.05, size=m)


@_timed
def skorohod_suite(rng, paths: int = 200, candidates: int = 100, max_points: int = 1000,
                   reflect: Callable = skorohod_reflect) -> SuiteResult:
    """Exact agreement with the brute-force regulator, complementarity and minimality."""
    mismatches = compl_bad = minimal_bad = other_bad = 0
    for i in range(paths):
        x = random_netput(rng, max_points)
        V, I = reflect(x)
        V_ref, I_ref = brute_force_reflect(x)
        if not (np.array_equal(I, I_ref) and np.array_equal(V, V_ref)):
            mismatches += 1
        if np.any(V < 0) or np.any(np.diff(I) < 0) or I[0] != max(0.0, -x[0]) or not np.array_equal(V, x + I):
            other_bad += 1
        if complementarity_check(V, I) != 0.0 or complementarity_check(V, I, rule="right") != 0.0:
            compl_bad += 1
        if i < candidates:
            # a nondecreasing regulator with x + I' >= 0 by construction; the
            # slack is sparse so candidates often touch I
            slack = rng.exponential(0.5, size=x.size) * (rng.random(x.size) < 0.05)
            I_alt = np.maximum.accumulate(np.maximum(-x + slack, 0.0))
            if np.any(I > I_alt):
                minimal_bad += 1
    ok = mismatches == 0 and compl_bad == 0 and minimal_bad == 0 and other_bad == 0
    detail = (f"{mismatches} oracle mismatches, {other_bad} invariant failures, "
              f"{compl_bad} nonzero residuals, {minimal_bad} minimality violations over {paths} paths")
    return SuiteResult("skorohod", ok, detail, metrics={
        "mismatches": mismatches, "invariant_failures": other_bad,
        "complementarity_failures": compl_bad, "minimality_failures": minimal_bad,
    })


@dataclass
class SelfcheckReport:
    suites: list

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def lines(self) -> list[str]:
        return [f"{'PASS' if s.passed else 'FAIL'} {s.name}: {s.detail} ({s.seconds:.2f}s)" for s in self.suites]


def algebra_suites(seed: int = 0, coeff: Callable = coeff_map) -> list[SuiteResult]:
    ss = np.random.SeedSequence(seed)
    r1, r2, r3, r4 = (np.random.default_rng(s) for s in ss.spawn(4))
    return [normalization_suite(r1), consistency_suite(r2, coeff=coeff), round_trip_suite(r3), channel_suite(r4)]


def run_selfcheck(seed: int = 0, coeff: Callable = coeff_map, reflect: Callable = skorohod_reflect,
                  include=("algebra", "skorohod")) -> SelfcheckReport:
    suites = []
    if "algebra" in include:
        suites += algebra_suites(seed, coeff)
    if "skorohod" in include:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(99,)))
        suites.append(skorohod_suite(rng, reflect=reflect))
    return SelfcheckReport(suites)
