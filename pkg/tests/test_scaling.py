"""Running extrema, generalized inverses, concentration functions and scaling reports."""
from dataclasses import replace

import numpy as np
import pytest

from subdense import NumericalIntegrityError, log_stable, stable, tempered
from subdense.scaling import (MONOTONE, NO_DRIFT, WLSC_D2, WLSC_PHI, WUSC_D2, WUSC_PHI,
                              InverseDomainError, compensator, concentration_h,
                              concentration_K, estimate_scaling, generalized_inverse,
                              h_from_K, hypotheses, inequality_audit, log_grid, parse_grid,
                              phi_inverse, psi_profile, psi_star, re_psi, running_inf,
                              running_sup, scaling_reports, tail_scaling_check,
                              varphi_profile)


# running sup / inf
def test_running_sup_monotone():
    assert running_sup(np.sqrt, 9.0) == pytest.approx(3.0)
    assert running_sup(np.sqrt, 9.0, nondecreasing=True) == 3.0


def test_running_sup_of_varphi(half):
    prof = varphi_profile(half)
    assert prof.sup_star(4.0) == pytest.approx(0.5)
    assert prof.increasing


def test_running_sup_finds_interior_max():
    # max of exp(-(log x)^2) sin^2 bump sits at x = 1 with value 1
    f = lambda x: np.exp(-np.log(x) ** 2) * (1 + 0.1 * np.sin(np.log(x)) ** 2)
    xs = np.exp(np.linspace(-5, 5, 200001))
    assert running_sup(f, 1e3) == pytest.approx(f(xs).max(), abs=1e-6)


def test_running_inf():
    assert running_inf(lambda x: 1.0 / x + x, 0.1) == pytest.approx(2.0, abs=1e-9)


# generalized inverse
def test_inverse_identity():
    assert generalized_inverse(lambda r: r, 7.0) == pytest.approx(7.0, rel=1e-10)


def test_inverse_of_psi_star(half):
    # psi*(r) = sqrt(r)/sqrt(2), so the inverse at 1 is 2
    assert psi_profile(half).inverse(1.0) == pytest.approx(2.0, rel=1e-9)


def test_inverse_plateau_endpoints():
    step = lambda r: np.clip(r, 0, 1) + np.clip(r - 2.0, 0, None)
    assert generalized_inverse(step, 1.0, side="right") == pytest.approx(2.0, rel=1e-9)
    assert generalized_inverse(step, 1.0, side="left") == pytest.approx(1.0, rel=1e-9)


def test_inverse_above_range_is_inf():
    assert generalized_inverse(lambda r: min(r, 1.0), 2.0) == np.inf


def test_inverse_below_range():
    with pytest.raises(InverseDomainError):
        generalized_inverse(lambda r: 1.0 + r, 0.5)


def test_inverse_roundtrip_on_grid(half):
    prof = varphi_profile(half)
    for x in log_grid(1e-3, 1e3, 4):
        assert prof.inverse(prof.sup_star(x)) == pytest.approx(x, rel=1e-10)


def test_phi_inverse(half):
    assert phi_inverse(half, 3.0) == pytest.approx(9.0, rel=1e-10)


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("0.1:10:3"), [0.1, 1.0, 10.0])
    assert parse_grid("2:2:1").tolist() == [2.0]
    for bad in ("1:2", "0:1:3", "1:2:0"):
        with pytest.raises(ValueError):
            parse_grid(bad)


# concentration functions [DERIVED: antiderivatives of the power density]
def test_concentration_values(half):
    assert concentration_K(half, 1.0) == pytest.approx(1 / (3 * np.sqrt(np.pi)), rel=1e-10)
    assert concentration_h(half, 1.0) == pytest.approx(4 / (3 * np.sqrt(np.pi)), rel=1e-10)


def test_concentration_drift(drift_model):
    assert concentration_K(drift_model, 1.0) == 0.0
    assert concentration_h(drift_model, 1.0) == 0.0
    assert psi_star(drift_model, 1.0) == 0.0


@pytest.mark.parametrize("r", [0.1, 1.0, 10.0])
def test_h_from_K_identity(half, tempered_model, r):
    for m in (half, tempered_model):
        assert h_from_K(m, r) == pytest.approx(concentration_h(m, r), rel=1e-6)


def test_psi_star_value_and_bracket(half):
    assert psi_star(half, 1.0) == pytest.approx(1 / np.sqrt(2), rel=1e-10)
    h = concentration_h(half, 1.0)
    assert h / 24 == pytest.approx(0.03135, abs=1e-5)
    assert 2 * h == pytest.approx(1.50451, abs=1e-5)


def test_psi_star_bracket_violation_detected(half, monkeypatch):
    import subdense.scaling as sc
    monkeypatch.setattr(sc, "concentration_h", lambda m, r: 100.0)
    with pytest.raises(NumericalIntegrityError):
        sc.psi_star(half, 1.0)


def test_re_psi_quadrature(tempered_model):
    q = tempered_model.with_quadrature()
    xi = np.array([0.1, 1.0, 10.0])
    np.testing.assert_allclose(re_psi(q, xi), re_psi(tempered_model, xi), rtol=1e-8)


# compensator b_r
def test_compensator_from_exponent_matches_levy(tempered_model):
    bare = replace(tempered_model, levy=None)
    for r in (0.01, 0.7, 5.0):
        assert compensator(bare, r) == pytest.approx(tempered_model.levy.moment(1, r),
                                                     rel=1e-9)


def test_compensator_stable(half):
    # int_0^r s c s^{-3/2} ds = 2 c sqrt(r), c = 1/(2 sqrt(pi))
    assert compensator(half, 4.0) == pytest.approx(2.0 / np.sqrt(np.pi), rel=1e-10)


# scaling estimator
def test_estimate_stable_index(half):
    f = lambda x: -np.asarray(half.deriv(x, 2))
    rep = estimate_scaling(f, (1e-3, 1e3), "lower")
    assert rep.index_estimate == pytest.approx(-1.5, abs=0.02)
    assert rep.constant_estimate == pytest.approx(1.0, abs=0.01)
    assert rep.passed


def test_estimate_gamma_index():
    rep = estimate_scaling(lambda x: (1 + x) ** -2.0, (1e-3, 1e3), "lower")
    assert rep.index_estimate <= -2 + 0.02


def test_estimate_constant_function():
    rep = estimate_scaling(lambda x: np.ones_like(x), (1e-3, 1e3), "upper")
    assert rep.index_estimate == 0.0 and rep.constant_estimate == 1.0


def test_estimate_fixed_index_constant():
    # x(2 + sin log x) has index 1 up to a bounded factor 1/3..3
    rep = estimate_scaling(lambda x: x * (2 + np.sin(np.log(x))), (1e-3, 1e3), "lower",
                           index=1.0)
    assert rep.index_estimate == 1.0
    assert 1 / 3 - 1e-9 <= rep.constant_estimate < 1


def test_estimate_rejects_vanishing():
    with pytest.raises(ValueError):
        estimate_scaling(lambda x: x - 1.0, (1e-3, 1e3))


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_stable_hypotheses_all_hold(alpha):
    hyp = hypotheses(stable(alpha))
    for key in (WLSC_D2, WUSC_D2, WLSC_PHI, WUSC_PHI, NO_DRIFT, MONOTONE):
        assert hyp[key], key


def test_gamma_fails_d2_lower(gamma_model):
    hyp = hypotheses(gamma_model)
    assert not hyp[WLSC_D2]
    # phi = log(1 + lambda) is slowly varying; a finite window sees a small index
    rep = scaling_reports(gamma_model)[("-phi''", "lower")]
    assert rep.index_estimate + 2 < 0.02


def test_log_stable_reports(logstable):
    rep = scaling_reports(logstable)
    assert rep[("-phi''", "lower")].passed and rep[("-phi''", "upper")].passed
    hyp = hypotheses(logstable)
    assert hyp[WLSC_D2] and hyp[WUSC_D2]


def test_tempered_reports_restricted_to_x0(tempered_model):
    rep = scaling_reports(tempered_model)[("-phi''", "lower")]
    assert rep.x0 == 1.0 and rep.x_lo == 1.0
    assert hypotheses(tempered_model)[WLSC_D2]


def test_degenerate_hypotheses(drift_model):
    assert scaling_reports(drift_model) == {}
    assert not any(v for k, v in hypotheses(drift_model).items() if k != NO_DRIFT)


# tail scaling
def test_tail_scaling_stable(half):
    rep = tail_scaling_check(half, 0.0, 0.5)
    assert rep["pass"] and rep["constant"] == pytest.approx(1.0)


def test_tail_scaling_tempered_large_theta():
    # the exponential tail cannot be bounded by a power on large r
    rep = tail_scaling_check(tempered(1.0, 0.5, 50.0), 0.0, 0.5)
    assert not rep["reverse_pass"] and rep["reverse_constant"] > 1e6


def test_tail_scaling_vacuous(drift_model):
    assert tail_scaling_check(drift_model, 0.0, 0.5)["vacuous"]


# inequality audit [DERIVED: algebra on phi = sqrt(lambda)]
def test_inequality_constants_stable(half):
    a = inequality_audit(half)
    assert a["x phi' <= phi <= C x phi'"]["constant"] == pytest.approx(2.0)
    assert a["phi - x phi' <= C varphi"]["constant"] == pytest.approx(2.0)
    assert a["f >= C x|f'| for f=-phi''"]["constant"] == pytest.approx(2 / 3)
    assert all(v["pass"] for v in a.values() if isinstance(v, dict))


def test_inequality_audit_skips_drift(drift_model):
    a = inequality_audit(drift_model)
    assert a["skipped"] and a["notice"] == "φ″≡0"


def test_inequality_audit_gamma_passes_vacuously(gamma_model):
    a = inequality_audit(gamma_model)
    assert all(v["pass"] for v in a.values() if isinstance(v, dict))
    assert not a["f >= C x|f'| for f=-phi''"]["hypothesis"]


def test_log_stable_not_exactly_bernstein(logstable):
    # fifth derivative of sqrt(s) log(2+s) has the wrong sign near s = 5
    import mpmath as mp
    f = lambda s: mp.sqrt(s) * mp.log(2 + s)
    assert mp.diff(f, 5, 5) < 0
    assert mp.diff(f, 1, 5) > 0
