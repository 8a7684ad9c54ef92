import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from stein_poisson.malliavin import NormalizedUStat
from stein_poisson.point_process import PointConfiguration, TorusDomain
from stein_poisson.stein import (SteinSolutionSin, empirical_w1, expected_second_derivative,
                                 gauss_hermite_expectation, hermite_check, normal_cdf,
                                 normal_inv_cdf, normal_reference_functional,
                                 optimality_functional, remainder, remainder_diagnostic,
                                 stein_sin_eval)

F = SteinSolutionSin
# -int_0^inf sin(u) exp(-u^2/2) du, from adaptive quadrature (independent of erfcx)
F_AT_ZERO = -0.7247784590070763


def test_value_at_zero():
    f0, fp0 = stein_sin_eval(0.0)
    assert f0 == pytest.approx(F_AT_ZERO, abs=1e-12)
    assert fp0 == 0.0
    assert F.f(0.0) == pytest.approx(F_AT_ZERO, abs=1e-14)


@pytest.mark.parametrize("x", [-30.0, -7.5, -2.0, -0.3, 0.4, 1.0, 3.3, 8.0, 25.0, 40.0])
def test_closed_form_matches_quadrature(x):
    f, fp = stein_sin_eval(x)
    assert float(F.f(x)) == pytest.approx(f, abs=1e-10)
    assert float(F.fprime(x)) == pytest.approx(fp, abs=1e-9)


def test_clamped_domain():
    assert stein_sin_eval(55.0) == stein_sin_eval(40.0)


@given(st.floats(-40, 40))
def test_solution_is_even(x):
    # sin is odd, E sin(N) = 0, and the bounded solution is even
    assert F.f(-x) == pytest.approx(F.f(x), abs=1e-14)


def test_stein_residual():
    x = np.linspace(-8, 8, 16001)
    assert np.max(np.abs(F.fprime(x) - x * F.f(x) - np.sin(x))) <= 1e-8


def test_smoothness_class():
    x = np.linspace(-40, 40, 400_001)
    assert np.max(np.abs(F.fprime(x))) <= 1.0
    assert np.max(np.abs(F.fsecond(x))) <= 2.0


def test_second_derivative_finite_differences():
    x = np.linspace(-6, 6, 1201)
    h = 1e-5
    fd = (F.fprime(x + h) - F.fprime(x - h)) / (2 * h)
    assert np.max(np.abs(fd - F.fsecond(x))) <= 1e-6


def test_expected_second_derivative():
    # E f''(N) = e^{-1/2} / 3, checked by quadrature of the analytic f''
    assert expected_second_derivative(96) == pytest.approx(math.exp(-0.5) / 3, abs=1e-12)
    assert expected_second_derivative() == pytest.approx(math.exp(-0.5) / 3, abs=1e-15)


def test_hermite_projection_value():
    # E[N sin N] = e^{-1/2}, E[N^3 sin N] = 2 e^{-1/2}, so 3^{-1} E[sin N H_3 N] = -e^{-1/2}/3
    assert hermite_check() == pytest.approx(-math.exp(-0.5) / 3, abs=1e-12)
    assert hermite_check(64) == pytest.approx(hermite_check(128), abs=1e-10)
    assert hermite_check(h=np.cos) == pytest.approx(0.0, abs=1e-14)


def test_gaussian_integration_by_parts():
    # E f''(N) = E[N f'(N)]
    lhs = gauss_hermite_expectation(F.fsecond, 96)
    rhs = gauss_hermite_expectation(lambda x: F.fprime(x) * x, 96)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_normal_inv_cdf_examples():
    assert normal_inv_cdf(0.5) == 0.0
    assert normal_inv_cdf(float(normal_cdf(1.0))) == pytest.approx(1.0, abs=1e-9)
    assert normal_inv_cdf(0.975) == pytest.approx(1.959964, abs=1e-6)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_normal_inv_cdf_domain(p):
    with pytest.raises(ValueError):
        normal_inv_cdf(p)


@given(st.floats(1e-300, 1 - 1e-16))
def test_normal_inv_cdf_accuracy(p):
    assert normal_inv_cdf(p) == pytest.approx(special.ndtri(p), abs=1e-9)


def test_w1_point_mass():
    for m in (1, 2, 17, 1000):
        assert empirical_w1(np.zeros(m)) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)


def test_w1_quantile_sample():
    m = 10_000
    assert empirical_w1(normal_inv_cdf((np.arange(1, m + 1) - 0.5) / m)) < 3e-4


def test_w1_shift():
    for c in (5.0, 20.0, 60.0):
        assert empirical_w1(np.full(10, c)) == pytest.approx(c, rel=1e-3)


def test_w1_errors():
    with pytest.raises(ValueError):
        empirical_w1([])
    with pytest.raises(ValueError):
        empirical_w1([0.0, np.inf])


def _trapezoid_oracle(x):
    x = np.sort(x)
    breaks = np.concatenate([[-10.0], x[(x > -10) & (x < 10)], [10.0]])
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        k = max(2, int(math.ceil((b - a) / 1e-4)) + 1)
        g = np.linspace(a, b, k)
        mid = 0.5 * (a + b)
        level = np.searchsorted(x, mid, side="right") / x.size
        total += np.trapezoid(np.abs(level - normal_cdf(g)), g)
    return total


def test_w1_matches_trapezoid_oracle():
    gen = np.random.default_rng(0)
    for _ in range(100):
        m = int(gen.integers(1, 51))
        x = gen.normal(gen.uniform(-1, 1), gen.uniform(0.3, 2), size=m)
        x = np.clip(x, -9.5, 9.5)
        assert abs(empirical_w1(x) - _trapezoid_oracle(x)) < 1e-6


@given(st.lists(st.floats(-8, 8), min_size=1, max_size=30))
def test_w1_nonnegative_and_translation_bound(xs):
    x = np.asarray(xs)
    w = empirical_w1(x)
    assert w >= 0
    assert abs(empirical_w1(x + 0.5) - w) <= 0.5 + 1e-12


def test_remainder_examples():
    for v in (-2.0, 0.0, 1.3):
        assert remainder(v, 0.0) == pytest.approx(0.5 * float(F.fsecond(v)), abs=1e-14)


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_remainder_bounded(v, dz):
    assert abs(remainder(v, dz)) <= 1.0


def test_remainder_mean_near_limit():
    n = 2048
    us = NormalizedUStat.edge_count(n, n ** -0.25)
    z = np.array([0.5])
    vals = np.array([remainder_diagnostic(us, us.sample(6, r), z) for r in range(4000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 0.5 * expected_second_derivative()) < 3 * se


def test_normal_draws_functional_is_zero():
    est = normal_reference_functional(100_000, seed=0)
    assert abs(est.value) <= 3 * est.stderr


def test_optimality_functional_controls_agree():
    n = 512
    us = NormalizedUStat.edge_count(n, n ** -0.25)
    a = optimality_functional(us, 4000, seed=2, control="first_chaos")
    b = optimality_functional(us, 4000, seed=2, control="linear")
    c = optimality_functional(us, 4000, seed=2, control="none")
    assert a.plain == b.plain == c.plain == c.value
    assert a.stderr < b.stderr < c.stderr
    assert abs(a.value - c.value) < 3 * c.stderr
    assert a.scaled == pytest.approx(a.value * math.sqrt(n))


def test_optimality_functional_lower_bound_consistency():
    n = 256
    us = NormalizedUStat.edge_count(n, n ** -0.25)
    rows = []
    for r in range(3000):
        cfg = us.sample(8, r)
        rows.append((us.value(cfg), us.first_chaos_value(cfg)))
    est = optimality_functional(us, len(rows), values=rows)
    assert abs(est.value) <= empirical_w1(np.array(rows)[:, 0]) + 3 * est.stderr


def test_first_chaos_mean_closed_form():
    us = NormalizedUStat.edge_count(64, 0.2)
    vals = np.array([math.sin(us.first_chaos_value(us.sample(1, r))) for r in range(20_000)])
    assert abs(vals.mean() - us.first_chaos_sin_mean()) < 4 * vals.std() / math.sqrt(vals.size)


def test_optimality_functional_validation():
    us = NormalizedUStat.edge_count(64, 0.2)
    with pytest.raises(ValueError):
        optimality_functional(us, 1)
    with pytest.raises(ValueError):
        optimality_functional(us, 10, control="bogus")
