import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from qubit_queue.distributions import BatchLaw, Law
from qubit_queue.engine import ClassParams, simulate_queues
from qubit_queue.errors import DegenerateConfiguration, DomainError, EmptySamples, GridMismatch, HorizonTooShort
from qubit_queue.fields import RateField, SpherePoint, build_regime_fixed_n, cap_ladder
from qubit_queue.limits import (
    RESULT_COLUMNS,
    RBMParams,
    ScaledPath,
    aggregate_variance,
    compare_distributions,
    complementarity_check,
    complementarity_tolerance,
    convergence_experiment,
    diffusion_scale,
    fluid_deviation,
    ks_critical,
    rbm_cdf,
    rbm_oracle,
    skorohod_reflect,
)
from qubit_queue.selfcheck import brute_force_reflect

finite = st.floats(-1e6, 1e6, allow_nan=False)


# reflection


def test_reflect_example():
    V, I = skorohod_reflect([0.0, 1.0, -1.0, 0.5])
    np.testing.assert_array_equal(I, [0, 0, 1, 1])
    np.testing.assert_array_equal(V, [0, 1, 0, 1.5])


def test_reflect_monotone_inputs():
    t = np.linspace(0, 5, 51)
    V, I = skorohod_reflect(t)
    np.testing.assert_array_equal(V, t)
    assert not np.any(I)
    V, I = skorohod_reflect(-t)
    np.testing.assert_array_equal(I, t)
    assert not np.any(V)


@given(arrays(float, st.integers(1, 300), elements=finite))
def test_reflect_matches_brute_force(x):
    V, I = skorohod_reflect(x)
    V_ref, I_ref = brute_force_reflect(x)
    np.testing.assert_array_equal(I, I_ref)
    np.testing.assert_array_equal(V, V_ref)
    assert np.all(V >= 0)
    assert np.all(np.diff(I) >= 0)
    assert complementarity_check(V, I) == 0.0


@given(arrays(float, st.integers(1, 200), elements=finite), st.data())
def test_reflect_minimality(x, data):
    # any nondecreasing nonnegative I' keeping x + I' >= 0 dominates I
    slack = data.draw(arrays(float, x.size, elements=st.floats(0, 10)))
    I_alt = np.maximum.accumulate(np.maximum(-x + slack, 0.0))
    _, I = skorohod_reflect(x)
    assert np.all(I <= I_alt)


def test_reflect_batched_rows():
    x = np.array([[0.0, -1.0, 2.0], [1.0, -3.0, -2.0]])
    V, I = skorohod_reflect(x)
    for row in range(2):
        np.testing.assert_array_equal(V[row], skorohod_reflect(x[row])[0])


# complementarity


def test_complementarity_cases():
    V = np.array([0.0, 1.0, 2.0, 0.0])
    assert complementarity_check(V, np.full(4, 3.0)) == 0.0
    assert complementarity_check(np.zeros(4), np.arange(4.0)) == 0.0
    # idling while V is strictly positive on the cell is penalized
    assert complementarity_check([1.0, 2.0], [0.0, 0.5]) == pytest.approx(0.5)
    assert complementarity_check([1.0, 2.0], [0.0, 0.5], rule="right") == pytest.approx(1.0)
    assert complementarity_check([1.0, 2.0], [0.0, 0.5], V_low=[0.0]) == 0.0
    with pytest.raises(GridMismatch):
        complementarity_check(np.zeros(3), np.zeros(4))
    with pytest.raises(GridMismatch):
        complementarity_check(np.zeros(3), np.zeros(3), V_low=np.zeros(3))
    assert complementarity_tolerance([0.0, 2.0], 0.01) == pytest.approx(0.04)


def test_idling_server_leaves_residual():
    # mutation: an engine that idles with work present shows up in the check
    rng = np.random.default_rng(0)
    x = np.cumsum(rng.normal(0, 1, 500))
    V, I = skorohod_reflect(x)
    lazy_I = I + np.linspace(0, 1, I.size)
    lazy_V = x + lazy_I
    assert complementarity_check(lazy_V, lazy_I) > complementarity_tolerance(lazy_V, 1 / 500)


# scaling


def single_class(lam=0.5, m=2.0, mu=1.0, Lam=1.0):
    return ClassParams(1, lam, Law("exponential"), BatchLaw("geometric", m), mu, Law("exponential"), Lam)


def test_scale_identity_and_example():
    c = single_class(lam=0.0)
    path = simulate_queues([c], T=4.0, dt=0.5, rng=np.random.default_rng(0), q0=[2])
    sp = diffusion_scale(path, 1.0, t_max=4.0)
    np.testing.assert_array_equal(sp.V, path.V)
    np.testing.assert_array_equal(sp.grid, path.grid)
    # V(4) = 2 is held by a queue that never drains (speed near zero)
    slow = ClassParams(1, 0.0, Law("exponential"), BatchLaw("deterministic", 1), 1.0, Law("deterministic"), 1e-9)
    path = simulate_queues([slow], T=4.0, dt=0.5, rng=np.random.default_rng(0), q0=[2])
    assert path.V[-1] == pytest.approx(2.0)
    assert diffusion_scale(path, 4.0).V[-1] == pytest.approx(1.0)


def test_scale_composes():
    c = single_class()
    path = simulate_queues([c], T=64.0, dt=1 / 8, rng=np.random.default_rng(3))
    direct = diffusion_scale(path, 16.0, t_max=1.0)
    twice = diffusion_scale(diffusion_scale(path, 4.0, t_max=4.0), 4.0, t_max=1.0)
    np.testing.assert_allclose(twice.grid, direct.grid)
    np.testing.assert_allclose(twice.V, direct.V)
    np.testing.assert_allclose(twice.I, direct.I)
    np.testing.assert_allclose(twice.Bbar, direct.Bbar)
    assert twice.r == 16.0


def test_scale_errors():
    path = simulate_queues([single_class()], T=8.0, dt=0.5, rng=np.random.default_rng(0))
    with pytest.raises(HorizonTooShort):
        diffusion_scale(path, 16.0)
    with pytest.raises(DomainError):
        diffusion_scale(path, 0.5)


def test_centered_arrivals_and_fluid():
    c = single_class()
    path = simulate_queues([c], T=16.0, dt=0.25, rng=np.random.default_rng(1))
    sp = diffusion_scale(path, 16.0, classes=[c])
    expect = (path.A[0] - 2 * 0.5 * path.grid) / 4.0
    np.testing.assert_allclose(sp.A[0], expect)
    sat = ScaledPath(1.0, np.linspace(0, 1, 5), np.zeros(5), np.zeros(5), np.linspace(0, 1, 5)[None, :])
    assert fluid_deviation(sat) == 0.0


# variance and oracle


def test_aggregate_variance_examples():
    # Poisson single arrivals, exponential lengths: 1 + 1
    c = ClassParams(1, 1.0, Law("exponential"), BatchLaw("deterministic", 1), 1.0, Law("exponential"), 1.0)
    assert aggregate_variance([c]) == pytest.approx(2.0)
    assert aggregate_variance([c, c]) == pytest.approx(4.0)
    # geometric batches m=2: m^2 lam (zeta2 + alpha2) = 4 * (0.5 + 1) = 6
    g = single_class(lam=1.0, m=2.0)
    assert aggregate_variance([g], lam=[1.0], Lam=[2.0]) == pytest.approx(8.0)


@settings(max_examples=50)
@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 10))
def test_aggregate_variance_homogeneity(lam, Lam, mu, c):
    p = ClassParams(1, lam, Law("erlang", 0.5), BatchLaw("geometric", 1.5), mu, Law("lognormal", 0.7), Lam)
    base = aggregate_variance([p])
    assert aggregate_variance([p], [c * lam], [c * Lam]) == pytest.approx(c * base)
    assert aggregate_variance([p.with_rates(lam, Lam)]) == pytest.approx(base)


def test_rbm_params_validation():
    with pytest.raises(DegenerateConfiguration):
        RBMParams(0.0, 0.0)
    with pytest.raises(DomainError):
        RBMParams(0.0, 1.0, v0=-1.0)
    with pytest.raises(DomainError):
        rbm_oracle(RBMParams(0.0, 1.0), 1.0, 0, np.random.default_rng(0))


def test_rbm_cdf_limits():
    p = RBMParams(-1.0, 2.0)
    assert rbm_cdf(-0.1, p, 1.0) == 0.0
    assert rbm_cdf(0.0, p, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert rbm_cdf(50.0, p, 1.0) == pytest.approx(1.0)
    y = np.linspace(0, 5, 100)
    assert np.all(np.diff(rbm_cdf(y, p, 1.0)) >= 0)
    # zero drift: |N(0, t)|
    q = RBMParams(0.0, 1.0)
    np.testing.assert_allclose(rbm_cdf(y, q, 1.0), 2 * stats.norm.cdf(y) - 1, atol=1e-12)
    # negative drift, long time: exponential stationary law with rate 2|theta|/sigma2
    np.testing.assert_allclose(rbm_cdf(y, p, 200.0), 1 - np.exp(-y), atol=1e-9)


def test_rbm_oracle_driftless_mean():
    x = rbm_oracle(RBMParams(0.0, 1.0), 1.0, 20_000, np.random.default_rng(4), steps=1024)
    se = math.sqrt((1 - 2 / math.pi) / x.size)
    assert abs(x.mean() - math.sqrt(2 / math.pi)) < 4 * se


@pytest.mark.parametrize("params", [RBMParams(-1.0, 8.0), RBMParams(0.5, 1.0), RBMParams(-2.0, 1.0, v0=0.3)])
def test_rbm_oracle_matches_cdf(params):
    x = rbm_oracle(params, 1.0, 5000, np.random.default_rng(5), steps=1024)
    res = stats.kstest(x, lambda y: rbm_cdf(y, params, 1.0))
    assert res.pvalue > 1e-3


def test_rbm_oracle_far_from_boundary():
    # started far above 0 the reflection never acts: Gaussian endpoint
    x = rbm_oracle(RBMParams(-1.0, 1.0, v0=20.0), 1.0, 4000, np.random.default_rng(6), steps=64)
    assert abs(x.mean() - 19.0) < 4 / math.sqrt(x.size)
    assert x.var() == pytest.approx(1.0, rel=0.1)


# distribution comparison


def test_compare_distributions_extremes():
    a = np.arange(10.0)
    assert compare_distributions(a, a).ks == 0.0
    assert compare_distributions(a, a + 100).ks == 1.0
    with pytest.raises(EmptySamples):
        compare_distributions([], a)
    rep = compare_distributions(a, a[:5])
    assert rep.n_a == 10 and rep.n_b == 5
    assert rep.ks_critical_1pct == pytest.approx(1.6276 * math.sqrt(15 / 50), rel=1e-3)


def test_two_oracle_draws_agree():
    p = RBMParams(-1.0, 8.0)
    a = rbm_oracle(p, 1.0, 2000, np.random.default_rng(7), steps=512)
    b = rbm_oracle(p, 1.0, 2000, np.random.default_rng(8), steps=512)
    rep = compare_distributions(a, b)
    assert rep.ks_pass
    assert ks_critical(2000, 2000) == pytest.approx(rep.ks_critical_1pct)


# convergence driver


def tiny_regime(classes, theta=-1.0):
    field = RateField("constant", [c.arrival_rate for c in classes], [c.alpha2 for c in classes])
    caps = cap_ladder(SpherePoint.uniform_center(1), 0.2, 2)
    return build_regime_fixed_n(field, [c.m for c in classes], [c.mu for c in classes], theta, [4.0, 16.0], caps)


def test_convergence_experiment_structure():
    classes = [single_class(lam=1.0)]
    cells = convergence_experiment(tiny_regime(classes), classes, reps=20, seed=3, oracle_reps=200)
    assert [(c.k_or_n, c.r) for c in cells] == [(1, 4.0), (1, 16.0), (2, 4.0), (2, 16.0)]
    for c in cells:
        assert set(c.row()) == set(RESULT_COLUMNS)
        assert c.report.n_a == 20 and c.report.n_b == 200
        assert c.compl_ok
        assert c.sigma2_k == pytest.approx(8.0)
    again = convergence_experiment(tiny_regime(classes), classes, reps=20, seed=3, oracle_reps=200)
    assert [c.row() for c in again] == [c.row() for c in cells]


def test_convergence_experiment_degenerate():
    det = ClassParams(1, 1.0, Law("deterministic"), BatchLaw("deterministic", 1), 1.0, Law("deterministic"))
    with pytest.raises(DegenerateConfiguration):
        convergence_experiment(tiny_regime([det]), [det], reps=2)
