import math

import numpy as np
import pytest
from oracles import best_deterministic_power

from qdiscern.errors import EnumerationTooLarge
from qdiscern.hypothesis_testing import (
    LikelihoodRatioTest,
    beta_star,
    count_vectors,
    gamma_max,
    log_beta_star,
    monte_carlo_power,
    mp_test,
    power_approx_fisher,
    power_approx_stein,
    stein_exponent,
    test_performance as performance,
)

P0, P1 = (0.5, 0.5), (0.2, 0.8)


def test_count_vectors():
    cv = count_vectors(2, 2)
    assert sorted(map(tuple, cv)) == [(0, 2), (1, 1), (2, 0)]
    assert count_vectors(5, 3).shape == (21, 3)
    assert np.all(count_vectors(7, 4).sum(axis=1) == 7)
    with pytest.raises(EnumerationTooLarge):
        count_vectors(400, 4)


def test_mp_example():
    t = mp_test(P0, P1, 2, 0.25)
    assert t.boundary_prob == 0.0 or t.threshold_k > 1
    perf = performance(t, P0, P1)
    assert perf.alpha == pytest.approx(0.25, abs=1e-12)
    assert perf.beta == pytest.approx(0.36, abs=1e-12)
    assert perf.power == pytest.approx(0.64, abs=1e-12)
    assert beta_star(P0, P1, 2, 0.25) == pytest.approx(0.36, abs=1e-12)


def test_uninformative():
    p = (0.3, 0.7)
    for n in (1, 5, 30):
        t = mp_test(p, p, n, 0.1)
        perf = performance(t, p, p)
        assert perf.power == pytest.approx(0.1, abs=1e-12)
        assert beta_star(p, p, n, 0.1) == pytest.approx(0.9, abs=1e-12)


def test_one_copy_vertex():
    t_ = 0.3
    p1 = (math.cos(t_) ** 2, math.sin(t_) ** 2)
    perf = performance(mp_test((1, 0), p1, 1, 1e-6), (1, 0), p1)
    # Lambda = inf on outcome 1 is always rejected; the size is spent on outcome 0
    assert perf.alpha == pytest.approx(1e-6, abs=1e-15)
    assert perf.power == pytest.approx(math.sin(t_) ** 2 + 1e-6 * math.cos(t_) ** 2, abs=1e-14)
    assert perf.power >= math.sin(t_) ** 2


def test_fixed_tests():
    a = performance(LikelihoodRatioTest.always_accept(3, 2), P0, P1)
    assert (a.alpha, a.power) == (0.0, 0.0)
    r = performance(LikelihoodRatioTest.always_reject(3, 2), P0, P1)
    assert r.alpha == pytest.approx(1.0, abs=1e-15)
    assert r.power == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        LikelihoodRatioTest(1.0, 1.5, 2, 2)


@pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1, 0.3])
def test_size_is_exact(alpha):
    rng = np.random.default_rng(3)
    for n in (1, 4, 9):
        p0, p1 = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
        perf = performance(mp_test(p0, p1, n, alpha), p0, p1)
        assert perf.alpha == pytest.approx(alpha, abs=1e-12)
        assert perf.power + perf.beta == pytest.approx(1, abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_dominates_deterministic_rules(n):
    for p0, p1, a in [(P0, P1, 0.25), ((0.7, 0.3), (0.4, 0.6), 0.1), ((0.9, 0.1), (0.3, 0.7), 0.05)]:
        lrt = performance(mp_test(p0, p1, n, a), p0, p1).power
        assert best_deterministic_power(p0, p1, n, a) <= lrt + 1e-12


def test_monotone_in_n_and_alpha():
    betas = [beta_star(P0, P1, n, 0.05) for n in range(1, 30)]
    assert all(b <= a + 1e-15 for a, b in zip(betas, betas[1:]))
    powers = [1 - beta_star(P0, P1, 10, a) for a in (0.01, 0.05, 0.1, 0.2, 0.5)]
    assert all(b >= a for a, b in zip(powers, powers[1:]))


def test_log_domain_large_n():
    lb = log_beta_star(P0, P1, 200, 0.05)
    assert np.isfinite(lb)
    assert lb < -30
    lb3 = log_beta_star((0.2, 0.3, 0.5), (0.5, 0.3, 0.2), 150, 0.05)
    assert np.isfinite(lb3) and lb3 < -20


def test_stein_identical_models():
    res = stein_exponent((0.4, 0.6), (0.4, 0.6), 0.05, [10, 100, 1000])
    assert res.reference == 1.0
    assert [r for _, r in res.rows] == pytest.approx([0.95 ** (1 / n) for n in (10, 100, 1000)], rel=1e-12)


def test_stein_reference_and_regression():
    res = stein_exponent((0.5, 0.5), (0.8, 0.2), 0.05, [40])
    assert res.reference == pytest.approx(0.8, rel=1e-14)
    # finite-n value, converging slowly towards 0.8 from above
    assert res.rows[0][1] == pytest.approx(0.8820463753459418, rel=1e-12)


def test_stein_slope_feasible_range():
    ns = np.unique(np.geomspace(10, 5000, 25).astype(int))
    lb = np.array([log_beta_star(P0, (0.8, 0.2), int(n), 0.05) for n in ns])
    slope = np.polyfit(ns, lb, 1)[0]
    assert slope == pytest.approx(-math.log(1.25), rel=0.10)


def test_monte_carlo_agrees_with_exact():
    mc = monte_carlo_power(P0, P1, 2, 0.25, samples=100_000, seed=5)
    assert abs(mc.power - 0.64) <= 3 * mc.power_halfwidth
    assert abs(mc.alpha - 0.25) <= 3 * mc.alpha_halfwidth
    mc = monte_carlo_power((0.3, 0.7), (0.3, 0.7), 10, 0.05, samples=20_000, seed=1)
    assert abs(mc.power - 0.05) <= 3 * mc.power_halfwidth + 1e-12


def test_monte_carlo_large_n():
    exact = 1 - beta_star(P0, P1, 60, 0.01)
    mc = monte_carlo_power(P0, P1, 60, 0.01, samples=50_000, seed=2)
    assert abs(mc.power - exact) <= 3 * mc.power_halfwidth + 1e-3


def test_monte_carlo_deterministic_and_thread_independent():
    a = monte_carlo_power(P0, P1, 7, 0.05, samples=30_000, seed=9, threads=1)
    b = monte_carlo_power(P0, P1, 7, 0.05, samples=30_000, seed=9, threads=1)
    c = monte_carlo_power(P0, P1, 7, 0.05, samples=30_000, seed=9, threads=4)
    assert a == b == c
    with pytest.raises(ValueError):
        monte_carlo_power(P0, P1, 7, 0.05, samples=10)


def test_power_approximations():
    assert power_approx_stein(10, 0.0) == 0.0
    assert power_approx_stein(2, math.log(2) / 2) == pytest.approx(0.5, rel=1e-14)
    assert power_approx_stein(40, math.log(1.25)) == pytest.approx(1 - 0.8**40, rel=1e-14)
    assert power_approx_stein(40, math.log(1.25)) == pytest.approx(0.99987, abs=1e-5)
    assert power_approx_stein(3, math.inf) == 1.0
    assert power_approx_fisher(5, 0.0, 0.3) == 0.0
    assert power_approx_fisher(2, 4.0, 0.5) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    J, dt = 3.3, 0.07
    assert power_approx_fisher(6, J, dt) == pytest.approx(power_approx_stein(6, 0.5 * J * dt**2), rel=1e-14)


def test_gamma_max():
    assert gamma_max(5, 1.0, 0.0) == (0.0, 0.0)
    exact, weak = gamma_max(1, 1.0, 0.1)
    assert exact == pytest.approx(1 - math.exp(-0.02), rel=1e-14)
    assert exact == pytest.approx(0.019801, abs=1e-6)
    assert weak == pytest.approx(0.02, rel=1e-14)
    # x - (1 - e^-x) ~ x^2/2, so the 1% bound holds up to just below x = 0.02
    for x in np.linspace(1e-4, 0.0199, 20):
        e, w = gamma_max(1, 1.0, math.sqrt(x / 2))
        assert abs(w - e) <= 0.01 * e
    assert gamma_max(10**6, 1.0, 1.0)[0] < 1.0 + 1e-15
