import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from qubit_queue.errors import DimensionMismatch, DomainError, InfeasibleRates, InvalidRadius
from qubit_queue.fields import (
    Cap,
    LimitPoint,
    RateField,
    RegimeMode,
    SpherePoint,
    build_regime_fixed_n,
    build_regime_varying_n,
    cap_area,
    cap_ladder,
    default_theta_sequence,
    drift_mu,
    embed,
    from_embedding,
    geodesic_distance,
    geodesic_walk_step,
    limit_rates,
    rate_at,
)
from qubit_queue.sphere import norm_squared

CENTER = SpherePoint.uniform_center(1)


def const_field(lam=2.0, alpha2=1.0):
    return RateField("constant", (lam,), (alpha2,))


# caps


def test_single_cap():
    (cap,) = cap_ladder(CENTER, 0.3, 1)
    assert cap.geodesic_radius == 0.3
    assert cap.contains(CENTER)


def test_radii_halve():
    caps = cap_ladder(CENTER, 0.2, 3)
    assert [c.geodesic_radius for c in caps] == [0.2, 0.1, 0.05]


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_areas_strictly_decrease(n):
    caps = cap_ladder(SpherePoint.uniform_center(n), math.pi / 4, 6)
    areas = [c.area for c in caps]
    assert all(b < a for a, b in zip(areas, areas[1:]))
    assert areas[-1] > 0


def test_cap_area_on_two_sphere():
    # n=1: two angles, S^2 in R^3; spherical cap area 2 pi (1 - cos rho)
    for rho in (0.01, 0.2, math.pi / 4, math.pi / 2):
        assert cap_area(1, rho) == pytest.approx(2 * math.pi * (1 - math.cos(rho)), rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_cap_area_matches_quadrature(n):
    d = 2**n
    lower = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    rho = 0.4
    want = lower * integrate.quad(lambda t: math.sin(t) ** (d - 1), 0, rho)[0]
    assert cap_area(n, rho) == pytest.approx(want, rel=1e-10)


def test_full_hemisphere_is_half_the_sphere():
    # |S^4| = 8 pi^2 / 3
    assert cap_area(2, math.pi / 2) == pytest.approx(4 * math.pi**2 / 3, rel=1e-12)


@pytest.mark.parametrize("rho0", [0.0, -0.1, math.pi / 4 + 1e-9, math.inf])
def test_invalid_radius(rho0):
    with pytest.raises(InvalidRadius):
        cap_ladder(CENTER, rho0, 2)


def test_invalid_length():
    with pytest.raises(InvalidRadius):
        cap_ladder(CENTER, 0.2, 0)


def test_caps_nested():
    rng = np.random.default_rng(4)
    caps = cap_ladder(SpherePoint.uniform_center(2), 0.4, 4)
    for inner, outer in zip(caps[1:], caps):
        for _ in range(20):
            p = geodesic_walk_step(inner.center, inner.geodesic_radius * rng.random(), rng)
            assert inner.contains(p) and outer.contains(p)


# embedding and distance


@settings(max_examples=100)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_embedding_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.05, math.pi / 2 - 0.05, 2**n)
    theta[-1] = rng.uniform(0, 2 * math.pi)
    p = SpherePoint(n, theta)
    np.testing.assert_allclose(embed(from_embedding(embed(p), n)), embed(p), atol=1e-12)
    assert np.linalg.norm(embed(p)) == pytest.approx(1.0, abs=1e-12)


def test_distance_basics():
    p = SpherePoint(1, [0.0, 0.0])
    q = SpherePoint(1, [math.pi / 2, 0.0])
    assert geodesic_distance(p, q) == pytest.approx(math.pi / 2)
    assert geodesic_distance(p, p) == 0.0
    with pytest.raises(DimensionMismatch):
        geodesic_distance(p, SpherePoint.uniform_center(2))


# walk


def test_zero_step_is_identity():
    assert geodesic_walk_step(CENTER, 0.0, np.random.default_rng(0)) is CENTER


@settings(max_examples=50)
@given(n=st.integers(1, 4), step=st.floats(1e-3, 1.0), seed=st.integers(0, 2**32 - 1))
def test_walk_stays_on_sphere(n, step, seed):
    rng = np.random.default_rng(seed)
    p = SpherePoint.uniform_center(n)
    q = geodesic_walk_step(p, step, rng)
    assert abs(norm_squared(q.state()) - 1) < 1e-12
    assert geodesic_distance(p, q) <= step + 1e-9


def test_walk_is_isotropic():
    rng = np.random.default_rng(11)
    p = SpherePoint.uniform_center(2)
    x = embed(p)
    moves = np.array([embed(geodesic_walk_step(p, 0.1, rng)) - x for _ in range(10_000)])
    # tangent components average out; the normal component is 1 - cos(0.1) on every step
    tangent = moves - np.outer(moves @ x, x)
    se = tangent.std(axis=0) / math.sqrt(len(moves))
    assert np.all(np.abs(tangent.mean(axis=0)) < 4 * se + 1e-12)
    np.testing.assert_allclose(moves @ x, math.cos(0.1) - 1, atol=1e-12)


def test_negative_step_rejected():
    with pytest.raises(DomainError):
        geodesic_walk_step(CENTER, -0.1, np.random.default_rng(0))


# rate fields


def test_constant_field():
    f = const_field(2.0, 0.7)
    for cap in cap_ladder(CENTER, 0.2, 3):
        assert rate_at(f, cap, 0) == (2.0, 0.7)


def test_affine_field_example():
    f = RateField("affine-in-angles", (1.0,), (1.0,), ((1.0,),))
    center = SpherePoint(1, [0.5, 0.0])
    (cap,) = cap_ladder(center, 0.1, 1)
    assert rate_at(f, cap, 0)[0] == pytest.approx(1.5)


def test_affine_field_clips_at_zero():
    f = RateField("affine-in-angles", (0.1,), (1.0,), ((-1.0,),))
    assert f.eval(0, SpherePoint(1, [1.0, 0.0]))[0] == 0.0


@settings(max_examples=100)
@given(
    coef=st.lists(st.floats(-2, 2), min_size=1, max_size=4),
    a=st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    b=st.lists(st.floats(-3, 3), min_size=4, max_size=4),
)
def test_affine_field_lipschitz(coef, a, b):
    f = RateField("affine-in-angles", (1.0,), (1.0,), (tuple(coef),))
    pa, pb = SpherePoint(2, a), SpherePoint(2, b)
    dist = float(np.max(np.abs(np.subtract(a, b))))
    assert abs(f.eval(0, pa)[0] - f.eval(0, pb)[0]) <= f.lipschitz * dist + 1e-12


def test_field_validation():
    with pytest.raises(DomainError):
        RateField("constant", (-1.0,), (1.0,))
    with pytest.raises(DomainError):
        RateField("quadratic", (1.0,), (1.0,))
    with pytest.raises(DimensionMismatch):
        RateField("constant", (1.0, 2.0), (1.0,))
    with pytest.raises(DimensionMismatch):
        RateField("affine-in-angles", (1.0,), (1.0,), ())
    f = RateField("affine-in-angles", (1.0,), (1.0,), ((1.0, 1.0, 1.0),))
    with pytest.raises(DimensionMismatch):
        f.eval(0, CENTER)


# drift


def test_drift_balanced():
    assert drift_mu([2], [1], [3], [6]) == 0.0


def test_drift_example():
    r = 64.0
    mu = drift_mu([2], [1], [3], [6 + 1 / math.sqrt(r)])
    assert mu == pytest.approx(-1 / math.sqrt(r), rel=1e-14)
    assert math.sqrt(r) * mu == pytest.approx(-1, rel=1e-14)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(0.5, 3), st.floats(0.5, 3), st.floats(0, 5), st.floats(0, 5)),
                min_size=1, max_size=4))
def test_drift_additive(rows):
    m, mu, lam, Lam = map(list, zip(*rows))
    total = drift_mu(m, mu, lam, Lam)
    parts = sum(drift_mu([a], [b], [c], [d]) for a, b, c, d in rows)
    assert total == pytest.approx(parts, rel=1e-12, abs=1e-12)


def test_drift_rejects_bad_means():
    with pytest.raises(DomainError):
        drift_mu([0], [1], [1], [1])


# regime ladders


def test_theta_zero_balances_exactly():
    caps = cap_ladder(CENTER, 0.2, 3)
    ladder = build_regime_fixed_n(const_field(1.5), [2.0], [1.0], 0.0, [16, 64, 256], caps)
    assert all(e.Lam == (3.0,) for e in ladder.entries)
    assert ladder.max_drift_error() == 0.0


def test_theta_minus_one_inverts_drift():
    caps = cap_ladder(CENTER, 0.2, 1)
    ladder = build_regime_fixed_n(const_field(3.0), [2.0], [1.0], -1.0, [4, 16, 64], caps, theta_k=[-1.0])
    for e in ladder.entries:
        assert e.Lam[0] == pytest.approx(6.0 + 1 / math.sqrt(e.r), rel=1e-15)
        assert e.theta_k == -1.0


@settings(max_examples=50)
@given(
    theta=st.floats(-3, 3),
    lam=st.lists(st.floats(0.5, 4), min_size=1, max_size=3),
    rs=st.lists(st.integers(100, 10_000), min_size=1, max_size=5, unique=True),
)
def test_ladder_exact_to_machine_precision(theta, lam, rs):
    J = len(lam)
    f = RateField("constant", tuple(lam), (1.0,) * J)
    caps = cap_ladder(CENTER, 0.2, 3)
    ladder = build_regime_fixed_n(f, [1.5] * J, [1.0 + j for j in range(J)], theta, sorted(rs), caps)
    assert ladder.max_drift_error() < 1e-12
    assert ladder.mode is RegimeMode.FIXED_N
    for k in ladder.ks:
        row = ladder.row(k)
        assert [e.r for e in row] == sorted(float(r) for r in rs)


def test_default_theta_sequence():
    assert default_theta_sequence(-1.0, [1, 2, 3]) == [-0.5, -0.75, -0.875]


def test_infeasible_rates():
    caps = cap_ladder(CENTER, 0.2, 1)
    with pytest.raises(InfeasibleRates):
        build_regime_fixed_n(const_field(0.1), [1.0], [1.0], 5.0, [1], caps, theta_k=[5.0])


def test_ladder_rejects_unsorted_r():
    caps = cap_ladder(CENTER, 0.2, 2)
    with pytest.raises(DomainError):
        build_regime_fixed_n(const_field(), [1.0], [1.0], -1.0, [64, 16], caps)


# S^infinity truncations and varying-n ladders


def test_limit_point_truncation_converges():
    x = LimitPoint((0.7, 0.9), 0.6)
    errs = [abs(x.truncate(n).theta[0] - 0.7) for n in range(1, 6)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-12


def test_constant_field_same_rates_every_level():
    x = LimitPoint((0.7,), 0.6)
    ladder = build_regime_varying_n(const_field(1.2), x, [2.0], [1.0], -1.0, [16, 64], [1, 2, 3, 4])
    assert {e.lam for e in ladder.entries} == {(1.2,)}
    assert ladder.mode is RegimeMode.VARYING_N


def test_varying_field_converges_to_limit():
    f = RateField("affine-in-angles", (0.5,), (1.0,), ((0.25, 0.25),))
    x = LimitPoint((0.7, 0.9), math.pi / 4)
    ladder = build_regime_varying_n(f, x, [2.0], [1.0], -1.0, [16, 64, 256], [1, 2, 3, 4])
    lam_x = limit_rates(f, x)[0][0]
    lam_n = [ladder.row(n)[0].lam[0] for n in ladder.ks]
    assert len(set(lam_n)) == 4
    gaps = [abs(v - lam_x) for v in lam_n]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert ladder.max_drift_error() < 1e-12
    radii = [ladder.row(n)[0].cap.geodesic_radius for n in ladder.ks]
    assert all(b < a for a, b in zip(radii, radii[1:]))
    thetas = [ladder.row(n)[0].theta_k for n in ladder.ks]
    assert thetas == default_theta_sequence(-1.0, [1, 2, 3, 4])


def test_limit_point_validation():
    with pytest.raises(DomainError):
        LimitPoint((0.0,), 0.5)
    with pytest.raises(DomainError):
        LimitPoint((0.5,), math.pi / 2)


def test_cap_fields_readonly():
    cap = Cap(CENTER, 0.1, cap_area(1, 0.1))
    with pytest.raises(ValueError):
        cap.center.theta[0] = 1.0
