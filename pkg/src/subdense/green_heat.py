"""Green function G(x) = int_0^inf p(t, x) dt and heat kernels of subordinate processes."""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc

from .bernstein import log_stable
from .bounds import check_time, regime_of
from .density import density, solve_saddle
from .errors import CapabilityError, ModelSpecError, OutOfRangeError
from .parallel import fan_out
from .quadrature import gauss_panels
from .scaling import (ALPHA_HALF, MONOTONE, NO_DRIFT, WLSC_D2, WLSC_PHI, WUSC_PHI,
                      generalized_inverse, hypotheses, phi_inverse, require,
                      running_sup, varphi_profile)

A_WINDOW = 1.0


def f_ratio(model, x):
    """f(x) = varphi(x) / phi'(x)."""
    return float(varphi_profile(model).varphi(x)) / float(model.deriv(x, 1))


def f_inverse(model, s):
    """Right inverse of the running sup of f."""
    return generalized_inverse(lambda r: running_sup(lambda v: np.array(
        [f_ratio(model, u) for u in np.atleast_1d(v)]), r), s, side="right")


def green_split(model, x):
    """t* = x / phi'(f^-1(1/x)), the time scale separating the two pieces."""
    return x / float(model.deriv(f_inverse(model, 1.0 / x), 1))


def require_green(model):
    require(model, [WLSC_PHI, WUSC_PHI, WLSC_D2], "Green function")
    hyp = hypotheses(model)
    if not (hyp[MONOTONE] or hyp[ALPHA_HALF]):
        raise CapabilityError(f"Green function: {MONOTONE}: failed; {ALPHA_HALF}: failed")


@dataclass
class GreenResult:
    x: float
    value: float
    inner: float
    outer: float
    t_star: float
    estimate_form: float
    ratio: float

    def to_dict(self):
        return dict(self.__dict__)


def _t_weighted(model, x):
    """y -> t p(t, x) at t = e^y, the integrand of G in log time."""
    def g(y):
        try:
            r = density(model, float(np.exp(y)), x)
        except OutOfRangeError as exc:
            raise CapabilityError(f"Green function at x={x}: density unavailable "
                                  f"at t={np.exp(y):.3g} ({exc})") from None
        return float(np.exp(r.log_value + y)) if r.value > 0 else r.value * float(np.exp(y))
    return g


def _cut(g, y0, step, ref, rel=1e-14, max_steps=200):
    y = y0
    for _ in range(max_steps):
        y += step
        if abs(g(y)) < rel * ref:
            return y
    raise OutOfRangeError("Green integrand does not decay in time")


def green(model, x, window=A_WINDOW, rtol=1e-9):
    """G(x) by adaptive quadrature in log t on either side of t*."""
    require_green(model)
    if not x > 0:
        raise ValueError("x must be positive")
    if model.x0 > 0 and not x < window / model.x0:
        raise OutOfRangeError(f"x={x} is not below A/x0 = {window / model.x0}")
    ts = green_split(model, x)
    g = _t_weighted(model, x)
    ys = np.log(ts)
    ref = max(g(ys + d) for d in (-2.0, -1.0, 0.0, 1.0, 2.0))
    y_lo = _cut(g, ys, -1.0, ref)
    y_hi = _cut(g, ys, 1.0, ref)
    kw = dict(epsabs=0.0, epsrel=rtol, limit=200)
    inner = quad(g, y_lo, ys, **kw)[0]
    outer = quad(g, ys, y_hi, **kw)[0]
    val = inner + outer
    form = 1.0 / (x * float(model.phi(1.0 / x)))
    return GreenResult(x=x, value=val, inner=inner, outer=outer, t_star=ts,
                       estimate_form=form, ratio=val / form)


def green_transform_identity(model, lam_grid, x_lo=1e-4, x_hi=None, per_decade=3,
                             tail_tol=1e-6):
    """Relative error of int e^{-lam x} G(x) dx = 1/phi(lam) per lam.

    G is computed on a log grid and splined in log-log coordinates; below
    x_lo a power law fitted to the first two nodes is integrated exactly.
    """
    lam_grid = np.asarray(lam_grid, dtype=float)
    if x_hi is None:
        x_hi = 60.0 / lam_grid.min()
    n = int(np.ceil(np.log10(x_hi / x_lo) * per_decade)) + 1
    xs = np.logspace(np.log10(x_lo), np.log10(x_hi), n)
    gs = np.array(fan_out(lambda v: green(model, float(v)).value, xs))
    lx, lg = np.log(xs), np.log(gs)
    spline = CubicSpline(lx, lg)
    q = (lg[1] - lg[0]) / (lx[1] - lx[0])
    a = gs[0] / xs[0] ** q
    nodes, weights = gauss_panels(np.linspace(lx[0], lx[-1], 4 * n), 20)
    nodes, weights = nodes.ravel(), weights.ravel()
    gx = np.exp(spline(nodes) + nodes)
    rows = []
    for lam in lam_grid:
        head = a * gamma_fn(q + 1) * gammainc(q + 1, lam * x_lo) / lam ** (q + 1)
        body = float((np.exp(-lam * np.exp(nodes)) * gx * weights).sum())
        tail = gs[-1] * np.exp(-lam * x_hi) / lam
        target = 1.0 / float(model.phi(lam))
        row = {"lambda": float(lam), "transform": head + body, "target": target,
               "rel_error": (head + body) / target - 1.0}
        if tail > tail_tol * target:
            row["hint"] = f"widen x_hi beyond {x_hi:.3g}: tail estimate {tail:.2e}"
        rows.append(row)
    return {"rows": rows, "max_rel_error": max(abs(r["rel_error"]) for r in rows),
            "x_range": [x_lo, x_hi], "head_exponent": q}


# heat kernels ---------------------------------------------------------------------

@dataclass
class HeatProfile:
    """Two-sided bound t^{-n/gamma} Phi_i(tau t^{-1/gamma}) of a parent heat kernel."""

    n: float
    gamma: float
    phi1: object
    phi2: object
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError("n must be positive")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not self.phi1(1.0) > 0:
            raise ValueError("Phi_1(1) must be positive")

    def decay_check(self, s_max=1e4, per_decade=16):
        """sup Phi_2(s)(1+s)^(n+gamma) over [0, s_max] and whether Phi_1 <= Phi_2 there."""
        s = np.concatenate([[0.0], np.logspace(-4, np.log10(s_max), int(8 * per_decade) + 1)])
        w = self.phi2(s) * (1.0 + s) ** (self.n + self.gamma)
        tail_falls = w[-1] <= w[-per_decade - 1] * (1 + 1e-12)
        return {"sup": float(w.max()), "finite": bool(np.isfinite(w.max()) and tail_falls),
                "ordered": bool(np.all(self.phi1(s) <= self.phi2(s) * (1 + 1e-12)))}

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "gamma": self.gamma, **self.params}


def fractal_profile(n=np.log(3) / np.log(2), gamma=np.log(5) / np.log(2)):
    """Phi_1 = Phi_2 = exp(-s^(gamma/(gamma-1))); defaults are the Sierpinski gasket values."""
    e = gamma / (gamma - 1.0)
    f = lambda s: np.exp(-np.power(np.asarray(s, dtype=float), e))
    return HeatProfile(n=n, gamma=gamma, phi1=f, phi2=f, kind="fractal",
                       params={})


def gaussian_profile(c1=1.0, c2=1.0, n=1.0, gamma=2.0):
    """Phi_i = exp(-c_i s^2) with c1 >= c2."""
    if c1 < c2:
        raise ValueError("need c1 >= c2 so that Phi_1 <= Phi_2")
    return HeatProfile(n=n, gamma=gamma,
                       phi1=lambda s: np.exp(-c1 * np.asarray(s, dtype=float) ** 2),
                       phi2=lambda s: np.exp(-c2 * np.asarray(s, dtype=float) ** 2),
                       kind="gaussian", params={"c1": c1, "c2": c2})


def profile_from_dict(d):
    """Build a heat profile from {"kind": "fractal"|"gaussian", ...}."""
    if not isinstance(d, dict):
        raise ModelSpecError("profile document must be a JSON object")
    kind = d.get("kind")
    keys = {"fractal": ("n", "gamma"), "gaussian": ("c1", "c2", "n", "gamma")}
    if kind not in keys:
        raise ModelSpecError(f"unknown profile kind {kind!r}", field="kind")
    kw = {}
    for k in keys[kind]:
        if k in d:
            v = d[k]
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ModelSpecError("expected a number", field=k)
            kw[k] = float(v)
    try:
        return (fractal_profile if kind == "fractal" else gaussian_profile)(**kw)
    except ValueError as exc:
        raise ModelSpecError(str(exc), field="kind") from None


def log_stable_reference(alpha, sigma, n, gamma):
    """Closed-form heat kernel shapes for phi(s) = s^alpha log^sigma(2+s).

    Returns (large_t, small_t) with large_t(t) the on-diagonal shape and
    small_t(t, tau) the off-diagonal one.
    """
    k = n / (alpha * gamma)

    def large_t(t):
        return t ** -k * np.log(2.0 + 1.0 / t) ** (-sigma * k)

    def small_t(t, tau):
        return t * tau ** (-alpha * gamma - n) * np.log(2.0 + tau ** -gamma) ** sigma

    return large_t, small_t


def example_profiles():
    """Named profiles, the log-stable model and its reference shapes."""
    return {"fractal": fractal_profile, "gaussian": gaussian_profile,
            "log_stable_model": log_stable, "log_stable_reference": log_stable_reference}


class DensityTable:
    """log p(t, s) on Gauss nodes in log s, with a power-law right tail."""

    def __init__(self, model, t, left_exponent=120.0, decades_right=8.0, per_decade=3):
        self.model, self.t = model, t
        s_typ = 1.0 / phi_inverse(model, 1.0 / t)
        # left end: the saddle exponent reaches left_exponent
        def expo(logs):
            return solve_saddle(model, t, t * model.drift + np.exp(logs)).exponent - left_exponent
        a = np.log(s_typ)
        while expo(a) < 0:
            a -= 1.0
        lo = a
        hi = np.log(s_typ) + decades_right * np.log(10.0)
        n = max(int(np.ceil((hi - lo) / np.log(10.0) * per_decade)), 4)
        nodes, weights = gauss_panels(np.linspace(lo, hi, n + 1), 20)
        self.y, self.w = nodes.ravel(), weights.ravel()
        s = np.exp(self.y) + t * model.drift
        res = fan_out(lambda v: density(model, t, float(v)), s)
        self.logp = np.array([r.log_value for r in res])
        # s p(t, s), kept signed should the exponent fail to be Bernstein
        self.sp = np.array([np.exp(r.log_value + y) if r.value > 0 else r.value * np.exp(y)
                            for r, y in zip(res, self.y)])
        # p ~ a s^-q beyond the table, fitted on the last decade
        k = (self.y > hi - np.log(10.0)) & np.isfinite(self.logp)
        self.q, self.loga = np.polyfit(self.y[k], self.logp[k], 1)
        self.q = -self.q
        self.y_hi = hi

    def integrate(self, kernel):
        """int kernel(s) p(t, s) ds, kernel given as a function of s."""
        s = np.exp(self.y)
        body = float((kernel(s) * self.sp * self.w).sum())
        tail = quad(lambda y: float(kernel(np.exp(y))) * np.exp(self.loga + (1 - self.q) * y),
                    self.y_hi, self.y_hi + 200.0, epsabs=0, epsrel=1e-10, limit=200)[0]
        return body + tail


@lru_cache(maxsize=32)
def density_table(model, t):
    return DensityTable(model, t)


@dataclass
class HeatKernelResult:
    t: float
    tau: float
    lower: float
    upper: float
    estimate_form: float
    regime: str
    regime_value: float

    def to_dict(self):
        d = dict(self.__dict__)
        d["ratio_lower"] = self.lower / self.estimate_form
        d["ratio_upper"] = self.upper / self.estimate_form
        return d


def heat_estimate_form(model, n, gamma, t, tau):
    """Case formula: t phi(tau^-gamma) tau^-n if t phi(tau^-gamma) <= 1, else (phi^-1(1/t))^(n/gamma)."""
    r = t * float(model.phi(tau ** -gamma))
    if regime_of(r) == "bulk":
        return t * float(model.phi(tau ** -gamma)) * tau ** -n, r, "near"
    return phi_inverse(model, 1.0 / t) ** (n / gamma), r, "far"


def heat_kernel_subordinated(model, profile, t, tau):
    """Bounds on H(t, tau) from the parent bounds, plus the case-formula shape."""
    require(model, [WLSC_PHI, WUSC_PHI, WLSC_D2, NO_DRIFT, MONOTONE], "heat kernel")
    check_time(model, t)
    if model.x0 > 0 and not tau ** -profile.gamma > model.x0:
        raise OutOfRangeError(f"tau^-gamma = {tau ** -profile.gamma:.4g} is not above x0 = {model.x0}")
    table = density_table(model, t)
    n, g = profile.n, profile.gamma
    lower = table.integrate(lambda s: s ** (-n / g) * profile.phi1(tau * s ** (-1.0 / g)))
    upper = table.integrate(lambda s: s ** (-n / g) * profile.phi2(tau * s ** (-1.0 / g)))
    form, r, case = heat_estimate_form(model, n, g, t, tau)
    return HeatKernelResult(t=t, tau=tau, lower=lower, upper=upper, estimate_form=form,
                            regime=case, regime_value=r)
