"""Green function and subordinate heat kernels."""
import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from subdense import CapabilityError, ModelSpecError, OutOfRangeError, stable
from subdense.green_heat import (density_table, f_inverse, fractal_profile, gaussian_profile,
                                 green, green_split, heat_estimate_form,
                                 heat_kernel_subordinated, log_stable_reference,
                                 profile_from_dict)


# [DERIVED: G(x) = 1/sqrt(pi x) for phi = sqrt]
def test_green_half(half):
    g1, g4 = green(half, 1.0), green(half, 4.0)
    assert g1.value == pytest.approx(1 / np.sqrt(np.pi), rel=1e-8)
    assert g1.estimate_form == pytest.approx(1.0)
    assert g4.value == pytest.approx(1 / (2 * np.sqrt(np.pi)), rel=1e-8)
    assert g4.estimate_form == pytest.approx(0.5)
    assert g1.ratio == pytest.approx(g4.ratio, rel=1e-8)
    assert g1.inner > 0 and g1.outer > 0


@pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
def test_green_stable_ratio(x):
    # G(x) = x^(alpha-1)/Gamma(alpha), form 1/(x phi(1/x)) = x^(alpha-1)
    assert green(stable(0.7), x).ratio == pytest.approx(1 / gamma_fn(0.7), rel=1e-3)


def test_green_split(half):
    # f = varphi/phi' = sqrt(x)/4 / (1/(2 sqrt x)) = x/2, f^-1(1) = 2, t* = x/phi'(2)
    assert f_inverse(half, 1.0) == pytest.approx(2.0, rel=1e-9)
    assert green_split(half, 1.0) == pytest.approx(2 * np.sqrt(2), rel=1e-9)


def test_green_rejects_gamma(gamma_model):
    with pytest.raises(CapabilityError):
        green(gamma_model, 1.0)


def test_green_rejects_drift(drift_model):
    with pytest.raises(CapabilityError):
        green(drift_model, 1.0)


def test_green_window_for_x0(tempered_model):
    assert green(tempered_model, 0.5).value > 0
    with pytest.raises(OutOfRangeError):
        green(tempered_model, 2.0)


def test_green_rejects_nonpositive(half):
    with pytest.raises(ValueError):
        green(half, 0.0)


# profiles
def test_fractal_profile_at_zero():
    p = fractal_profile()
    assert p.phi1(0.0) == 1.0
    assert p.n == pytest.approx(np.log(3) / np.log(2))


@pytest.mark.parametrize("n", [1.0, 2.0, 5.0])
def test_gaussian_profile_decay(n):
    rep = gaussian_profile(n=n).decay_check()
    assert rep["finite"] and rep["ordered"]


def test_profile_validation():
    with pytest.raises(ValueError):
        gaussian_profile(c1=0.5, c2=1.0)
    with pytest.raises(ModelSpecError):
        profile_from_dict({"kind": "torus"})
    with pytest.raises(ModelSpecError):
        profile_from_dict({"kind": "fractal", "n": "two"})
    p = profile_from_dict({"kind": "gaussian", "c1": 2.0, "c2": 1.0, "n": 3})
    assert p.n == 3.0 and p.gamma == 2.0


# case formula [DERIVED: algebra on phi = sqrt]
def test_heat_form_near(half):
    form, r, case = heat_estimate_form(half, 1.0, 2.0, 1.0, 10.0)
    assert case == "near" and r == pytest.approx(0.1)
    assert form == pytest.approx(0.01)


def test_heat_form_far(half):
    form, r, case = heat_estimate_form(half, 1.0, 2.0, 1.0, 0.1)
    assert case == "far" and r == pytest.approx(10.0)
    assert form == pytest.approx(1.0)


def test_heat_kernel_ratio_within_decade(half):
    prof = gaussian_profile()
    res = [heat_kernel_subordinated(half, prof, 1.0, tau) for tau in np.logspace(-2, 2, 9)]
    r = np.array([h.lower / h.estimate_form for h in res])
    assert np.all(r > 0) and r.max() / r.min() <= 10


def test_heat_kernel_half_value(half):
    h = heat_kernel_subordinated(half, gaussian_profile(), 1.0, 10.0)
    assert h.lower == h.upper
    assert h.estimate_form == pytest.approx(0.01)
    assert h.lower == pytest.approx(0.002814, rel=1e-3)


def test_density_table_mass(half):
    table = density_table(half, 1.0)
    assert table.integrate(lambda s: np.ones_like(s)) == pytest.approx(1.0, abs=1e-6)
    assert table.integrate(lambda s: np.exp(-s)) == pytest.approx(np.exp(-1.0), rel=1e-6)


# [PAPER: large-t form t^(-n/(alpha gamma)) log^(-sigma n/(alpha gamma))(2 + 1/t)]
def test_log_stable_reference_large_t(logstable):
    prof = fractal_profile()
    large_t, _ = log_stable_reference(0.5, 1.0, prof.n, prof.gamma)
    ratios = [heat_estimate_form(logstable, prof.n, prof.gamma, t, 1.0)[0] / large_t(t)
              for t in (1e2, 1e3, 1e4)]
    assert np.all(np.abs(np.array(ratios) - 1) < 0.02)
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)


def test_heat_kernel_requires_hypotheses(gamma_model):
    with pytest.raises(CapabilityError):
        heat_kernel_subordinated(gamma_model, gaussian_profile(), 1.0, 1.0)
