"""Envelope functions, sharp forms and their audits."""
import numpy as np
import pytest

from subdense import CapabilityError, OutOfRangeError, stable
from subdense.bounds import (ZetaEta, check_time, envelope_audit, eta, levy_lower_check,
                             lower_bound_constant, lower_bound_region, regime_of,
                             sandwich_audit, sharp_estimate, shift, time_limit,
                             upper_bound_density, upper_bound_general, varphi_inv, zeta)
from subdense.density import density
from subdense.scaling import varphi_profile


# zeta / eta [DERIVED: varphi(x) = sqrt(x)/4]
def test_zeta_eta_half(half):
    assert zeta(half, 4.0) == pytest.approx(0.125)
    assert eta(half, 4.0) == pytest.approx(0.03125)
    assert zeta(half, -4.0) == zeta(half, 4.0)
    assert zeta(half, 0.0) == np.inf and eta(half, 0.0) == np.inf


def test_zeta_branch_continuity(tempered_model):
    ze = ZetaEta(tempered_model)
    s = 1.0 / tempered_model.x0
    left, right = ze.zeta(s * (1 - 1e-9)), ze.zeta(s * (1 + 1e-9))
    assert left == pytest.approx(right, rel=1e-6)
    assert ze.A == pytest.approx(varphi_profile(tempered_model).sup_star(1.0)
                                 / float(tempered_model.phi(1.0)))


def test_zeta_nonincreasing(half, tempered_model):
    s = np.logspace(-3, 3, 40)
    for m in (half, tempered_model):
        z = np.array([zeta(m, v) for v in s])
        assert np.all(np.diff(z) <= 1e-15 * z[:-1])


# time limit
def test_time_limit(half, tempered_model):
    assert time_limit(half) == np.inf
    lim = time_limit(tempered_model)
    assert np.isfinite(lim)
    check_time(tempered_model, 0.5 * lim)
    with pytest.raises(OutOfRangeError, match="varphi"):
        check_time(tempered_model, lim)


# upper envelopes [DERIVED: varphi^-1(r) = 16 r^2]
def test_varphi_inverse(half):
    assert varphi_inv(half, 1.0) == pytest.approx(16.0, rel=1e-9)


def test_upper_general_values(half):
    assert upper_bound_general(half, 1.0, 0.0) == pytest.approx(16.0, rel=1e-9)
    assert upper_bound_general(half, 1.0, 100.0) == pytest.approx(0.4, rel=1e-9)


def test_upper_general_decreasing(half):
    xs = np.logspace(-2, 4, 30)
    env = [upper_bound_general(half, 1.0, x) for x in xs]
    assert np.all(np.diff(env) <= 1e-12)
    assert env[-1] < 1e-2 * env[0]


def test_upper_density_values(half):
    assert upper_bound_density(half, 1.0, 100.0) == pytest.approx(2.5e-4, rel=1e-9)
    assert upper_bound_density(half, 1.0, 0.0) == pytest.approx(16.0, rel=1e-9)
    ratio = density(half, 1.0, 100.0).value / upper_bound_density(half, 1.0, 100.0)
    assert ratio == pytest.approx(1.126, abs=1e-3)


def test_upper_bound_needs_d2_scaling(gamma_model):
    with pytest.raises(CapabilityError, match="WLSC"):
        upper_bound_general(gamma_model, 1.0, 1.0)


def test_shift_stable(half):
    # r = 1/psi^-1(1/t) and b_r = 2 c sqrt(r) with psi^-1(s) = 2 s^2
    r = 1.0 / 2.0
    assert shift(half, 1.0) == pytest.approx(2 / (2 * np.sqrt(np.pi)) * np.sqrt(r), rel=1e-8)


# lower bound
def test_lower_region_centre(half):
    lo, hi = lower_bound_region(half, 1.0)
    assert 0.5 * (lo + hi) == pytest.approx(0.125, rel=1e-9)
    assert hi - lo == pytest.approx(2 / 16, rel=1e-9)


def test_lower_constant_positive(half):
    rep = lower_bound_constant(half, 1.0)
    assert rep["min_ratio"] > 0


def test_lower_constant_degenerate_interval(half):
    rep = lower_bound_constant(half, 1.0, rho1=0.0, rho2=0.0, n=1)
    assert rep["interval"][0] == pytest.approx(rep["interval"][1])
    assert rep["min_ratio"] > 0


def test_levy_lower_ratios(half):
    rep = levy_lower_check(half, [1.0, 10.0, 100.0])
    np.testing.assert_allclose(rep["nu_vs_phi2"]["ratios"], 2 / np.sqrt(np.pi), rtol=1e-10)
    np.testing.assert_allclose(rep["nu_vs_phi"]["ratios"], 1 / (2 * np.sqrt(np.pi)),
                               rtol=1e-10)
    assert rep["p_vs_nu"]["ratios"][-1] == pytest.approx(0.9975, abs=1e-4)


# sharp estimate [DERIVED: closed forms]
def test_sharp_tail(half):
    band = sharp_estimate(half, 1.0, 100.0)
    assert band.regime == "tail"
    assert band.lower_form == pytest.approx(1e-3, rel=1e-12)
    assert density(half, 1.0, 100.0).value / band.lower_form == pytest.approx(0.2814, abs=1e-4)


def test_sharp_bulk(half):
    band = sharp_estimate(half, 1.0, 0.25)
    assert band.regime == "bulk"
    assert band.lower_form == pytest.approx(0.28209479 * 8 * np.exp(-1), rel=1e-7)


def test_regime_boundary_convention(half):
    assert regime_of(1.0) == "bulk" and regime_of(1.0 + 1e-12) == "tail"
    band = sharp_estimate(half, 1.0, 1.0)
    assert band.regime_coordinate == pytest.approx(1.0)
    assert band.plateau and band.plateau_form == pytest.approx(1.0)


def test_sharp_rejects_gamma(gamma_model):
    with pytest.raises(CapabilityError):
        sharp_estimate(gamma_model, 1.0, 1.0)


def test_sharp_rejects_drift():
    with pytest.raises(CapabilityError, match="b=0"):
        sharp_estimate(stable(0.5, drift=1.0), 1.0, 2.0)


# audits
def test_sandwich_half_full_grid(half):
    rep = sandwich_audit(half, [0.01, 1.0, 100.0], np.logspace(-2, 2, 9))
    assert rep["passed"] and rep["spread"] <= 10
    bulk = [r["ratio"] for r in rep["rows"] if r["regime"] == "bulk"]
    np.testing.assert_allclose(bulk, 1.0, rtol=1e-6)


def test_sandwich_stable07_finite():
    rep = sandwich_audit(stable(0.7), [0.1, 1.0], np.logspace(-2, 2, 9))
    assert np.isfinite(rep["spread"]) and rep["min_ratio"] > 0


def test_envelope_audit(half):
    rep = envelope_audit(half, [0.1, 1.0], np.logspace(-1, 2, 7))
    assert 0 < rep["max_ratio"] < 20
    rep = envelope_audit(half, [1.0], [1.0, 10.0], kind="general")
    assert rep["max_ratio"] < 20
