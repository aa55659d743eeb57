"""Constant-free envelopes for p(t, x) and the audits that measure their constants.

Every bound returns the envelope without its unknown multiplicative
constant.  The audits compare those envelopes to contour-inversion
densities and report the constants actually needed.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .density import density, solve_saddle
from .errors import CapabilityError, OutOfRangeError
from .parallel import fan_out
from .scaling import (MONOTONE, NO_DRIFT, WLSC_D2, WLSC_PHI, WUSC_D2, WUSC_PHI,
                      compensator, phi_inverse, psi_profile, require, varphi_profile)

CHI = (0.5, 2.0)
SPREAD = 1e3


class ZetaEta:
    """zeta(s) = varphi*(1/s) for s <= 1/x0, A phi(1/s) beyond; eta(s) = zeta(s) / s.

    A = varphi*(x0) / phi(x0) makes zeta continuous at 1/x0.
    """

    def __init__(self, model):
        self.model = model
        self.profile = varphi_profile(model)
        self.x0 = float(model.x0)
        self.A = None
        if self.x0 > 0:
            self.A = self.profile.sup_star(self.x0) / float(model.phi(self.x0))

    def zeta(self, s):
        s = abs(float(s))
        if s == 0:
            return np.inf
        if self.x0 == 0 or s <= 1.0 / self.x0:
            return self.profile.sup_star(1.0 / s)
        return self.A * float(self.model.phi(1.0 / s))

    def eta(self, s):
        s = abs(float(s))
        return np.inf if s == 0 else self.zeta(s) / s


@lru_cache(maxsize=64)
def zeta_eta(model):
    return ZetaEta(model)


def zeta(model, s):
    return zeta_eta(model).zeta(s)


def eta(model, s):
    return zeta_eta(model).eta(s)


def time_limit(model):
    """1 / varphi(x0); +inf when x0 = 0."""
    if model.x0 == 0:
        return np.inf
    return 1.0 / float(varphi_profile(model).varphi(model.x0))


def check_time(model, t):
    if not t > 0:
        raise ValueError("t must be positive")
    lim = time_limit(model)
    if not t < lim:
        raise OutOfRangeError(f"t={t} is not below 1/varphi(x0) = {lim:.6g} "
                              f"(varphi(x0) threshold, x0={model.x0})")


def varphi_inv(model, t):
    """varphi^-1(1/t), the right inverse of the running sup."""
    return varphi_profile(model).inverse(1.0 / t)


def shift(model, t):
    """Centre t b_r of the upper envelopes, r = 1 / psi^-1(1/t)."""
    r = 1.0 / psi_profile(model).inverse(1.0 / t)
    return t * compensator(model, r)


def upper_bound_general(model, t, x):
    """varphi^-1(1/t) min(1, t zeta(|x|)), with x the offset from shift(model, t)."""
    require(model, [WLSC_D2], "upper bound")
    check_time(model, t)
    z = zeta(model, x)
    return varphi_inv(model, t) * (1.0 if np.isinf(z) else min(1.0, t * z))


def upper_bound_density(model, t, x):
    """min(varphi^-1(1/t), t eta(|x|)), with x the offset from shift(model, t)."""
    require(model, [WLSC_D2], "upper bound")
    if not model.monotone_density:
        raise CapabilityError("density upper bound: almost monotone density: failed; "
                              "use upper_bound_general, which needs no density")
    check_time(model, t)
    return min(varphi_inv(model, t), t * eta(model, x))


def lower_bound_region(model, t, rho1=1.0, rho2=1.0):
    """Interval of x on which p(t, x) is comparable from below to varphi^-1(1/t)."""
    require(model, [WLSC_D2, WUSC_D2], "lower bound")
    check_time(model, t)
    v = varphi_inv(model, t)
    centre = t * float(model.deriv(v, 1))
    return centre - rho1 / v, centre + rho2 / v


def lower_bound_constant(model, t, rho1=1.0, rho2=1.0, n=21):
    """inf of p(t, x) / varphi^-1(1/t) over the lower-bound interval."""
    lo, hi = lower_bound_region(model, t, rho1, rho2)
    lo = max(lo, t * model.drift + 1e-12 * hi)
    xs = np.linspace(lo, hi, n)
    ps = fan_out(lambda x: density(model, t, float(x)).value, xs)
    v = varphi_inv(model, t)
    return {"interval": [lo, hi], "min_ratio": float(np.min(ps) / v),
            "x_at_min": float(xs[int(np.argmin(ps))]), "constant": "empirical"}


def levy_lower_check(model, xs, t=1.0):
    """Worst constants in nu(x) >= c x^-3 (-phi''(1/x)), nu(x) >= c x^-1 phi(1/x), p >= C t nu."""
    if model.levy is None:
        raise CapabilityError("Levy lower check needs the Levy density")
    xs = np.asarray(xs, dtype=float)
    nu = model.levy.density(xs)
    r1 = nu * xs ** 3 / -model.deriv(1.0 / xs, 2)
    r2 = nu * xs / model.phi(1.0 / xs)
    p = np.array(fan_out(lambda x: density(model, t, float(x)).value, xs))
    r3 = p / (t * nu)
    return {"x": xs.tolist(),
            "nu_vs_phi2": {"ratios": r1.tolist(), "min": float(r1.min())},
            "nu_vs_phi": {"ratios": r2.tolist(), "min": float(r2.min())},
            "p_vs_nu": {"ratios": r3.tolist(), "min": float(r3.min())}}


@dataclass(frozen=True)
class EstimateBand:
    regime: str
    lower_form: float
    upper_form: float
    regime_coordinate: float
    plateau: bool = False
    plateau_form: float = None

    def to_dict(self):
        return {"regime": self.regime, "lower_form": self.lower_form,
                "upper_form": self.upper_form, "regime_coordinate": self.regime_coordinate,
                "plateau": self.plateau, "plateau_form": self.plateau_form}


def regime_of(coordinate):
    return "bulk" if coordinate <= 1.0 else "tail"


def sharp_estimate(model, t, x, chi=CHI):
    """Two-sided form: saddle expression when x phi^-1(1/t) <= 1, t phi(1/x) / x beyond."""
    # scaling of phi forces WLSC(alpha-2) on -phi''; checking it too catches
    # slowly varying phi that a finite window cannot tell from index > 0
    require(model, [WLSC_PHI, WUSC_PHI, WLSC_D2, NO_DRIFT, MONOTONE], "sharp estimate")
    check_time(model, t)
    if not x > 0:
        raise ValueError("x must be positive")
    inv = phi_inverse(model, 1.0 / t)
    coord = x * inv
    regime = regime_of(coord)
    if regime == "bulk":
        form = float(np.exp(solve_saddle(model, t, x).log_value))
    else:
        form = t * float(model.phi(1.0 / x)) / x
    plateau = chi[0] <= coord <= chi[1]
    return EstimateBand(regime=regime, lower_form=form, upper_form=form,
                        regime_coordinate=coord, plateau=plateau,
                        plateau_form=inv if plateau else None)


def sandwich_audit(model, t_grid, x_grid, spread=SPREAD):
    """Ratios p / sharp form over a grid; pass iff max/min <= spread and min > 0."""
    pts = [(float(t), float(x)) for t in t_grid for x in x_grid]

    def one(p):
        t, x = p
        band = sharp_estimate(model, t, x)
        res = density(model, t, x)
        # in the bulk both sides can underflow, so compare logarithms
        log_form = res.saddle.log_value if band.regime == "bulk" else np.log(band.lower_form)
        return {"t": t, "x": x, "regime": band.regime, "form": band.lower_form,
                "p": res.value, "ratio": float(np.exp(res.log_value - log_form))}

    rows = fan_out(one, pts)
    r = np.array([row["ratio"] for row in rows])
    lo, hi = float(r.min()), float(r.max())
    return {"rows": rows, "min_ratio": lo, "max_ratio": hi,
            "spread": hi / lo if lo > 0 else np.inf,
            "passed": bool(lo > 0 and hi / lo <= spread)}


def envelope_audit(model, t_grid, x_grid, kind="density"):
    """Largest p / upper envelope over the grid, x taken as absolute positions."""
    bound = upper_bound_density if kind == "density" else upper_bound_general
    pts = [(float(t), float(x)) for t in t_grid for x in x_grid]

    def one(p):
        t, x = p
        env = bound(model, t, x - shift(model, t))
        return density(model, t, x).value / env

    r = np.array(fan_out(one, pts))
    return {"max_ratio": float(r.max()), "min_ratio": float(r.min()), "n": len(pts),
            "constant": "empirical"}
