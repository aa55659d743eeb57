"""Saddle-point and contour inversion of exp(-t phi)."""
import mpmath as mp
import numpy as np
import pytest

from subdense import (CapabilityError, NumericalIntegrityError, OutOfRangeError,
                      SupportError, power, stable, tempered)
from subdense.density import (asymptotic_limit_check, density, density_bromwich,
                              density_grid, density_saddle, distribution_function,
                              laplace_roundtrip, integrand_decay_constant, mass_audit,
                              normalization, solve_saddle, support_window)
from subdense.levy import stable_constant
from subdense.sampler import half_stable_cdf, sample


def half_stable_exact(t, x):
    return t / (2 * np.sqrt(np.pi)) * x ** -1.5 * np.exp(-t * t / (4 * x))


# saddle equation [DERIVED: (phi')^-1(y) = 1/(4y^2) for phi = sqrt]
def test_saddle_point_values(half):
    s = solve_saddle(half, 1.0, 1.0)
    assert s.w == pytest.approx(0.25, rel=1e-12)
    assert s.saddle_mass == pytest.approx(0.125, rel=1e-12)
    assert s.exponent == pytest.approx(0.25, rel=1e-12)
    assert s.prefactor == pytest.approx((4 * np.pi) ** -0.5, rel=1e-12)


def test_saddle_point_t2(half):
    s = solve_saddle(half, 2.0, 1.0)
    assert s.w == pytest.approx(1.0, rel=1e-12)
    assert s.exponent == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("model", [stable(0.3), tempered(1.0, 0.5, 1.0)])
@pytest.mark.parametrize("x", [1e-3, 0.1, 1.0])
def test_saddle_equation_residual(model, x):
    s = solve_saddle(model, 1.0, x)
    assert float(model.deriv(s.w, 1)) == pytest.approx(x, rel=1e-10)
    assert s.exponent >= 0 and s.saddle_mass > 0


def test_saddle_support_error(drift_model):
    with pytest.raises(SupportError):
        solve_saddle(drift_model, 1.0, 0.5)


def test_saddle_out_of_range_beyond_mean(tempered_model):
    mean = tempered_model.dphi_at_zero()
    with pytest.raises(OutOfRangeError):
        solve_saddle(tempered_model, 1.0, 1.01 * mean)
    with pytest.raises(OutOfRangeError):
        density_saddle(tempered_model, 1.0, 1.01 * mean)


# saddle formula is exact for alpha = 1/2
@pytest.mark.parametrize("t, x, want", [(1.0, 1.0, 0.21969564), (1.0, 100.0, 2.8139e-4),
                                        (4.0, 1.0, 4 / (2 * np.sqrt(np.pi)) * np.exp(-4))])
def test_saddle_half_stable(half, t, x, want):
    res = density_saddle(half, t, x)
    assert res.value == pytest.approx(half_stable_exact(t, x), rel=1e-12)
    assert res.value == pytest.approx(want, abs=1e-8)


def test_saddle_region_flag(half):
    assert density_saddle(half, 1.0, 1.0).accuracy_flag == "outside_region"
    assert density_saddle(half, 100.0, 1.0).accuracy_flag == "ok"
    assert density_saddle(half, 1.0, 1.0, m0=0.1).accuracy_flag == "ok"


# contour inversion
def test_bromwich_half_stable(half):
    res = density_bromwich(half, 1.0, 1.0)
    assert res.value == pytest.approx(0.21969564, abs=1e-7)
    assert res.accuracy_flag == "ok"


@pytest.mark.parametrize("t, x", [(1.0, 0.05), (0.3, 1.0), (5.0, 2.0)])
def test_contour_independence(t, x):
    m = stable(0.7)
    a = density_bromwich(m, t, x)
    b = density_bromwich(m, t, x, c_factor=1.2)
    assert b.value == pytest.approx(a.value, rel=1e-6)


def test_bromwich_matches_mpmath_talbot():
    m = stable(0.7)
    ref = float(mp.invertlaplace(lambda z: mp.exp(-z ** 0.7), 1.0, method="talbot"))
    assert density(m, 1.0, 1.0).value == pytest.approx(ref, rel=1e-8)


def test_bromwich_quadrature_model_matches_closed_form():
    m = power(stable_constant(0.7), 0.7)
    q = m.with_quadrature()
    assert density(q, 1.0, 1.0).value == pytest.approx(density(m, 1.0, 1.0).value, rel=1e-8)


def test_bromwich_against_monte_carlo():
    m = stable(0.7)
    a, b = 0.5, 2.0
    n = 100_000
    dist = sample(m, 1.0, n, eps=1e-4, seed=11)
    p_emp = dist.cdf(b) - dist.cdf(a)
    nodes, w = np.polynomial.legendre.leggauss(30)
    xs = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    p_num = 0.5 * (b - a) * sum(wi * density(m, 1.0, float(x)).value for wi, x in zip(w, xs))
    se = np.sqrt(p_num * (1 - p_num) / n)
    assert abs(p_emp - p_num) < 3 * se


def test_node_budget_guard(half):
    with pytest.raises(NumericalIntegrityError):
        density_bromwich(half, 1e-3, 10.0, node_budget=50)


# dispatch
def test_support_flag():
    m = stable(0.5, drift=1.0)
    res = density(m, 1.0, 0.9)
    assert res.value == 0.0 and not res.support
    assert res.row()["flag"] == "support"


def test_both_ratio_exact_for_half(half):
    res = density(half, 1.0, 1.0, "both")
    assert res.ratio == pytest.approx(1.0, abs=1e-6)
    assert res.saddle_value == pytest.approx(0.21969564, abs=1e-7)


def test_ratio_tends_to_one_as_mass_grows():
    m = stable(0.7)
    xs = [0.3, 0.1, 0.03, 0.01]
    res = [density(m, 1.0, x, "both") for x in xs]
    mass = [r.saddle.saddle_mass for r in res]
    dev = [abs(r.ratio - 1) for r in res]
    assert np.all(np.diff(mass) > 0)
    assert np.all(np.diff(dev) < 0)


def test_unknown_method(half):
    with pytest.raises(ValueError):
        density(half, 1.0, 1.0, "fft")


def test_density_grid_row_major(half):
    res = density_grid(half, [1.0, 2.0], [0.5, 1.0, 2.0])
    assert [(r.t, r.x) for r in res] == [(t, x) for t in (1.0, 2.0) for x in (0.5, 1.0, 2.0)]
    for r in res:
        assert r.value == pytest.approx(half_stable_exact(r.t, r.x), rel=1e-8)


def tempered_half_exact(model, t, x):
    # exp(-t k sqrt(theta + z)) transforms e^{-theta x} times a half-stable law
    k, th = model.exponent.kappa, model.exponent.theta
    return np.exp(t * k * np.sqrt(th) - th * x) * half_stable_exact(t * k, x)


@pytest.mark.parametrize("x", [0.5, 1.7, 1.8, 5.0, 40.0, 100.0])
def test_tempered_half_exact(tempered_model, x):
    res = density(tempered_model, 1.0, x)
    assert res.value == pytest.approx(tempered_half_exact(tempered_model, 1.0, x), rel=1e-9)


def test_continued_saddle_beyond_mean(tempered_model):
    mean = tempered_model.dphi_at_zero()
    res = density(tempered_model, 1.0, 3.0 * mean)
    assert -1.0 < res.saddle.w < 0
    assert float(tempered_model.deriv(res.saddle.w, 1)) == pytest.approx(3.0 * mean)


def test_beyond_mean_needs_continuation(tempered_model):
    q = tempered_model.with_quadrature()
    with pytest.raises(OutOfRangeError):
        density(q, 1.0, 2.0 * tempered_model.dphi_at_zero())


def test_negative_values_reported_for_log_stable(logstable):
    # the exact inverse transform is negative here, so exp(-t phi) is not
    # the transform of a probability law
    ref = float(mp.invertlaplace(lambda z: mp.exp(-0.01 * mp.sqrt(z) * mp.log(2 + z)),
                                 1.0, method="talbot"))
    res = density(logstable, 0.01, 1.0)
    assert ref < 0
    assert res.accuracy_flag == "negative_value"
    assert res.value == pytest.approx(ref, rel=1e-6)


# asymptotic normalization [DERIVED: exactness at alpha = 1/2]
def test_limit_constant_half(half):
    vals = asymptotic_limit_check(half, 1.0, [1.0, 10.0, 100.0])
    np.testing.assert_allclose(vals, (2 * np.pi) ** -0.5, rtol=1e-8)


def test_limit_constant_stable07():
    assert asymptotic_limit_check(stable(0.7), 1.0, [1e3])[0] == pytest.approx(0.39894, abs=0.01)


def test_limit_rejects_degenerate(drift_model):
    with pytest.raises(CapabilityError):
        asymptotic_limit_check(drift_model, 1.0, [1.0])


def test_limit_rejects_drift():
    with pytest.raises(CapabilityError):
        asymptotic_limit_check(stable(0.5, drift=1.0), 2.0, [1.0])


# integral checks
def test_normalization_and_laplace(half):
    assert normalization(half, 1.0) == pytest.approx(1.0, abs=1e-6)
    for lam in (0.5, 2.0):
        got, want = laplace_roundtrip(half, 1.0, lam)
        assert got == pytest.approx(want, rel=1e-6)
        assert want == pytest.approx(np.exp(-np.sqrt(lam)))


def test_normalization_tempered_crosses_mean(tempered_model):
    lo, hi = support_window(tempered_model, 1.0)
    assert hi > tempered_model.dphi_at_zero()
    assert normalization(tempered_model, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_mass_audit_log_stable(logstable):
    rep = mass_audit(logstable, 1.0)
    assert rep["mass"] == pytest.approx(1.0, abs=1e-6)
    assert rep["negative_mass"] < -1e-3 and rep["min_density"] < 0


def test_distribution_function(half):
    cdf = distribution_function(half, 1.0)
    x = np.logspace(-2, 4, 50)
    assert np.max(np.abs(cdf(x) - half_stable_cdf(1.0, x))) < 1e-3
    assert cdf(np.array([-1.0]))[0] == 0.0


def test_integrand_decay_constant_positive():
    c = integrand_decay_constant(stable(0.7), [0.1, 1.0, 10.0], np.logspace(-3, 3, 25))
    assert 0 < c < np.inf
