"""Running sups, generalized inverses, concentration functions and weak scaling.

Weak lower scaling of f with index a means f(lam x) >= c lam^a f(x) for
lam >= 1 and x > x0; weak upper scaling is the mirror statement with
f(lam x) <= C lam^b f(x).  Indices are estimated from all ordered pairs of
a log grid, which is the two-point form of those definitions.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .bernstein import _quad_phi_complex
from .errors import CapabilityError, NumericalIntegrityError

PER_DECADE = 64
GRID_LO, GRID_HI = 10 ** -3.5, 10 ** 3.5
MARGIN = 0.02


def log_grid(lo, hi, per_decade=PER_DECADE):
    n = max(int(round(np.log10(hi / lo) * per_decade)) + 1, 2)
    return np.logspace(np.log10(lo), np.log10(hi), n)


def parse_grid(spec):
    """Parse ``"lo:hi:n"`` into a log-spaced array (n >= 1)."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid spec {spec!r} must look like lo:hi:n")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1 or not (lo > 0 and hi >= lo):
        raise ValueError(f"grid spec {spec!r} needs 0 < lo <= hi and n >= 1")
    if n == 1:
        return np.array([lo])
    return np.logspace(np.log10(lo), np.log10(hi), n)


# running extrema and inverses ------------------------------------------------

def running_sup(f, r, nondecreasing=False, decades=12, per_decade=PER_DECADE):
    """sup of f over (0, r].

    ``f`` must accept arrays.  The sup is taken over a log grid reaching
    ``decades`` below r, then polished by a bounded scalar search around
    the best grid point.
    """
    if nondecreasing:
        return float(f(np.array([r]))[0])
    x = np.logspace(np.log10(r) - decades, np.log10(r), decades * per_decade + 1)
    v = np.asarray(f(x), dtype=float)
    i = int(np.nanargmax(v))
    best = v[i]
    if 0 < i < len(x) - 1:
        res = minimize_scalar(lambda u: -float(f(np.array([np.exp(u)]))[0]),
                              bounds=(np.log(x[i - 1]), np.log(x[i + 1])),
                              method="bounded", options={"xatol": 1e-12})
        best = max(best, -res.fun)
    return float(best)


def running_inf(f, r, decades=12, per_decade=PER_DECADE):
    """inf of f over [r, inf), on a log grid reaching ``decades`` above r."""
    x = np.logspace(np.log10(r), np.log10(r) + decades, decades * per_decade + 1)
    v = np.asarray(f(x), dtype=float)
    i = int(np.nanargmin(v))
    best = v[i]
    if 0 < i < len(x) - 1:
        res = minimize_scalar(lambda u: float(f(np.array([np.exp(u)]))[0]),
                              bounds=(np.log(x[i - 1]), np.log(x[i + 1])),
                              method="bounded", options={"xatol": 1e-12})
        best = min(best, res.fun)
    return float(best)


class InverseDomainError(ValueError):
    """Level lies at or below the infimum of the function's range."""


def generalized_inverse(f_star, s, side="right", rtol=1e-12, r_min=1e-300, r_max=1e300):
    """Generalized inverse of a nondecreasing function.

    side="right" returns sup{r : f_star(r) <= s}, the right end of the level
    set; side="left" returns inf{r : f_star(r) >= s}, its left end.  Both are
    located by bisection in log r.  Returns inf when s is above the range.
    """
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    if side == "right":
        def below(r):
            return f_star(r) <= s
    else:
        def below(r):
            return f_star(r) < s
    lo = hi = 0.0  # log r
    if below(1.0):
        step = 1.0
        while below(np.exp(hi)):
            lo = hi
            hi += step
            step *= 2.0
            if hi > np.log(r_max):
                return np.inf
    else:
        step = 1.0
        while not below(np.exp(lo)):
            hi = lo
            lo -= step
            step *= 2.0
            if lo < np.log(r_min):
                raise InverseDomainError(f"level {s} is not above f*(0+)")
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        if below(np.exp(mid)):
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))


# the function x^2 (-phi''(x)) -----------------------------------------------

class VarphiProfile:
    """Evaluators for x^2(-phi''(x)), its running sup and inf, and their inverses.

    The running extrema are read off a cached log table and combined with
    the exact value at the query point.
    """

    def __init__(self, model, decades=(-15, 15), per_decade=None):
        self.model = model
        if per_decade is None:
            per_decade = 32 if model.uses_closed_form else 8
        lo, hi = decades
        self._x = np.logspace(lo, hi, (hi - lo) * per_decade + 1)
        self._v = self.varphi(self._x)
        self._cummax = np.maximum.accumulate(self._v)
        self._cummin_rev = np.minimum.accumulate(self._v[::-1])[::-1]
        self.increasing = bool(np.all(np.diff(self._v) > 0))

    def varphi(self, x):
        x = np.asarray(x, dtype=float)
        # inverse brackets probe out to 1e300, where x^2 overflows harmlessly
        with np.errstate(over="ignore", invalid="ignore"):
            return x ** 2 * (-np.asarray(self.model.deriv(x, 2)))

    def sup_star(self, x):
        x = float(x)
        v = float(self.varphi(x))
        if self.increasing:
            return v
        i = np.searchsorted(self._x, x, side="right") - 1
        return max(v, float(self._cummax[i])) if i >= 0 else v

    def inf_star(self, x):
        x = float(x)
        v = float(self.varphi(x))
        if self.increasing:
            return v
        i = np.searchsorted(self._x, x, side="left")
        return min(v, float(self._cummin_rev[i])) if i < len(self._x) else v

    @lru_cache(maxsize=4096)
    def inverse(self, s):
        """Right inverse sup{r : varphi*(r) = s}."""
        return generalized_inverse(self.sup_star, s, side="right")

    @lru_cache(maxsize=4096)
    def left_inverse(self, s):
        """Left inverse inf{r : varphi_*(r) = s}."""
        return generalized_inverse(self.inf_star, s, side="left")


@lru_cache(maxsize=64)
def varphi_profile(model):
    return VarphiProfile(model)


def phi_inverse(model, s):
    """Inverse of the (increasing) Laplace exponent."""
    return generalized_inverse(lambda r: float(model.phi(r)), s, side="right")


# concentration functions ---------------------------------------------------------

def _need_levy(model, what):
    if model.levy is None and not model.degenerate:
        raise CapabilityError(f"{what} needs the Levy density, which this model does not provide")


def concentration_K(model, r):
    """K(r) = r^-2 int_(0,r) s^2 nu(ds)."""
    _need_levy(model, "K")
    if model.degenerate:
        return 0.0
    return model.levy.scaled_moment(2, r)


def concentration_h(model, r):
    """h(r) = int min(1, s^2/r^2) nu(ds) = K(r) + nu((r, inf))."""
    _need_levy(model, "h")
    if model.degenerate:
        return 0.0
    return concentration_K(model, r) + model.levy.tail(r)


def h_from_K(model, r):
    """h(r) computed independently as 2 int_r^inf K(s) ds / s."""
    # K decays like a power of s, so s up to e^600 is far beyond the tolerance
    y0 = np.log(r)
    total = 0.0
    for a, b in ((y0, y0 + 20.0), (y0 + 20.0, 600.0)):
        if a < b:
            val, _ = quad(lambda y: 2.0 * concentration_K(model, np.exp(y)), a, b,
                          epsabs=0, epsrel=1e-11, limit=500)
            total += val
    return total


def _talbot(F, r, m=32):
    """Fixed Talbot inversion of the Laplace transform F at r > 0."""
    k = np.arange(1, m)
    theta = k * np.pi / m
    cot = 1.0 / np.tan(theta)
    rho = 2.0 * m / (5.0 * r)
    z = rho * theta * (cot + 1j)
    dz = 1.0 + 1j * (theta + (theta * cot - 1.0) * cot)
    head = 0.5 * np.exp(rho * r) * F(np.array([rho + 0j]))[0].real
    body = (np.exp(r * z) * F(z) * dz).real.sum()
    return rho / m * (head + body)


def compensator(model, r):
    """b_r = b + int_(0,r) s nu(ds).

    Without a Levy density the integral is recovered from the exponent:
    its Laplace transform in r is phi_J'(z) / z.
    """
    if model.degenerate:
        return model.drift
    if model.levy is None:
        if not model.analytic:
            _need_levy(model, "the compensator b_r")
        val = _talbot(lambda z: model.jump_deriv_complex(z, 1) / z, r)
        return model.drift + max(val, 0.0)
    return model.drift + model.levy.moment(1, r)


def re_psi(model, xi):
    """Real part of the characteristic exponent, int (1 - cos(xi s)) nu(ds)."""
    xi = np.abs(np.asarray(xi, dtype=float))
    if model.degenerate:
        return np.zeros_like(xi)
    if model.uses_closed_form:
        return np.asarray(model.jump_phi_complex(1j * xi)).real
    flat = [(_quad_phi_complex(model.levy, 0.0, float(v)).real if v > 0 else 0.0)
            for v in xi.ravel()]
    return np.array(flat).reshape(xi.shape)


def psi_star(model, r, check=True):
    """sup of Re psi over |xi| <= r, checked against the h-bracket."""
    if model.degenerate:
        return 0.0
    if model.uses_closed_form:
        val = running_sup(lambda v: re_psi(model, v), r)
    else:
        val = running_sup(lambda v: re_psi(model, v), r, decades=6, per_decade=8)
    if check and model.levy is not None:
        h = concentration_h(model, 1.0 / r)
        if not (h / 24.0 <= val <= 2.0 * h):
            raise NumericalIntegrityError(
                f"psi*({r}) = {val:.6g} falls outside [h/24, 2h] = [{h / 24:.6g}, {2 * h:.6g}]")
    return val


class PsiProfile:
    """Cached psi* table and its right inverse."""

    def __init__(self, model, decades=(-12, 12), per_decade=None):
        self.model = model
        if per_decade is None:
            per_decade = 32 if model.uses_closed_form else 4
        lo, hi = decades
        self._x = np.logspace(lo, hi, (hi - lo) * per_decade + 1)
        self._v = np.maximum.accumulate(re_psi(model, self._x))

    def star(self, r):
        v = float(re_psi(self.model, r))
        i = np.searchsorted(self._x, r, side="right") - 1
        return max(v, float(self._v[i])) if i >= 0 else v

    @lru_cache(maxsize=4096)
    def inverse(self, s):
        return generalized_inverse(self.star, s, side="right")


@lru_cache(maxsize=64)
def psi_profile(model):
    return PsiProfile(model)


# scaling estimation -----------------------------------------------------------------

@dataclass(frozen=True)
class ScalingReport:
    target: str
    side: str
    index_estimate: float
    constant_estimate: float
    x0: float
    passed: bool
    x_lo: float = GRID_LO
    x_hi: float = GRID_HI

    def to_dict(self):
        return {"target": self.target, "side": self.side, "index": self.index_estimate,
                "constant": self.constant_estimate, "x0": self.x0, "pass": self.passed,
                "range": [self.x_lo, self.x_hi]}


def estimate_scaling(f, x_range=(GRID_LO, GRID_HI), side="lower", index=None,
                     target="f", x0=0.0, per_decade=PER_DECADE, tol=1e-9,
                     end_decades=None, ends=("lo", "hi"), const_limit=np.inf):
    """Weak scaling index and constant of f from ordered grid pairs.

    The index is the extreme pairwise slope, taken over all pairs or, with
    ``end_decades``, over pairs lying within that many decades of the
    range ends named in ``ends``.  The constant is then the extreme ratio
    f(y) / f(x) (x/y)^index over all pairs.  Restricting the index to the
    ends lets a bounded bump in the middle of the range (a log correction
    turning over, say) go into the constant rather than the index.
    ``const_limit`` bounds the admissible constant (c >= 1/limit for lower
    reports, C <= limit for upper ones).  With ``index`` given, only the
    constant is estimated.
    """
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    x = log_grid(x_range[0], x_range[1], per_decade)
    v = np.asarray(f(x), dtype=float)
    if np.any(~(v > 0)) or np.any(~np.isfinite(v)):
        raise ValueError(f"{target} vanishes or is not finite on the grid")
    lx, lv = np.log(x), np.log(v)
    iu = np.triu_indices(len(x), k=1)
    dlx = (lx[None, :] - lx[:, None])[iu]
    dlv = (lv[None, :] - lv[:, None])[iu]
    slopes = dlv / dlx
    if index is None:
        pick = slopes
        if end_decades is not None:
            span = end_decades * np.log(10.0)
            a, b = iu
            near = np.zeros(len(slopes), dtype=bool)
            if "lo" in ends:
                near |= lx[b] <= lx[0] + span
            if "hi" in ends:
                near |= lx[a] >= lx[-1] - span
            pick = slopes[near]
        index = float(pick.min() if side == "lower" else pick.max())
    log_ratio = dlv - index * dlx
    if side == "lower":
        const = float(np.exp(min(log_ratio.min(), 0.0)))
        ok = 1.0 / const_limit <= const <= 1 + tol
    else:
        const = float(np.exp(max(log_ratio.max(), 0.0)))
        ok = 1 - tol <= const <= const_limit
    return ScalingReport(target, side, float(index), const, float(x0), bool(ok),
                         float(x_range[0]), float(x_range[1]))


def scaling_window(model):
    lo = max(GRID_LO, model.x0)
    hi = max(GRID_HI, lo * 10 ** 3)
    return lo, hi


# model audits read the index off the outer 1.5 decades at each end of the window
ZONES = {"end_decades": 1.5, "const_limit": 1e3}


@lru_cache(maxsize=64)
def scaling_reports(model):
    """Lower and upper reports for -phi'', phi and the tail nu((1/x, inf))."""
    if model.degenerate:
        return {}
    win = scaling_window(model)
    pd = PER_DECADE if model.uses_closed_form else 8
    # above a positive x0 only large arguments carry the index
    zones = dict(ZONES, ends=("hi",) if model.x0 > 0 else ("lo", "hi"))
    out = {}
    d2 = lambda x: -np.asarray(model.deriv(x, 2))
    ph = lambda x: np.asarray(model.phi(x)) - model.drift * np.asarray(x)
    for side in ("lower", "upper"):
        out[("-phi''", side)] = estimate_scaling(d2, win, side, target="-phi''",
                                                 x0=model.x0, per_decade=pd, **zones)
        out[("phi", side)] = estimate_scaling(ph, win, side, target="phi",
                                              x0=model.x0, per_decade=pd, **zones)
    if model.levy is not None:
        tl = lambda x: np.array([model.levy.tail(1.0 / v) for v in np.atleast_1d(x)])
        for side in ("lower", "upper"):
            out[("nu-tail", side)] = estimate_scaling(tl, win, side, target="nu-tail",
                                                      x0=model.x0, per_decade=min(pd, 16),
                                                      **zones)
    return out


WLSC_D2 = "WLSC(α−2), α>0"
WUSC_D2 = "WUSC(β−2), β<1"
WLSC_PHI = "WLSC(α), α>0"
WUSC_PHI = "WUSC(β), β<1"
NO_DRIFT = "b=0"
MONOTONE = "almost monotone density"
ALPHA_HALF = "α>1/2"


@lru_cache(maxsize=64)
def hypotheses(model):
    """Truth values of the scaling and structural hypotheses used downstream."""
    if model.degenerate:
        return {WLSC_D2: False, WUSC_D2: False, WLSC_PHI: False, WUSC_PHI: False,
                NO_DRIFT: model.drift == 0, MONOTONE: False, ALPHA_HALF: False}
    rep = scaling_reports(model)
    d2l, d2u = rep[("-phi''", "lower")], rep[("-phi''", "upper")]
    pl, pu = rep[("phi", "lower")], rep[("phi", "upper")]
    return {WLSC_D2: d2l.passed and d2l.index_estimate + 2.0 > MARGIN,
            WUSC_D2: d2u.passed and d2u.index_estimate + 2.0 < 1 - MARGIN,
            WLSC_PHI: pl.passed and pl.index_estimate > MARGIN,
            WUSC_PHI: pu.passed and pu.index_estimate < 1 - MARGIN,
            NO_DRIFT: model.drift == 0, MONOTONE: model.monotone_density,
            ALPHA_HALF: pl.passed and pl.index_estimate > 0.5}


def lower_alpha(model):
    """Estimated alpha with -phi'' in WLSC(alpha-2)."""
    return scaling_reports(model)[("-phi''", "lower")].index_estimate + 2.0


def require(model, names, what):
    """Raise CapabilityError listing every hypothesis in ``names`` that fails."""
    if model.degenerate:
        raise CapabilityError(f"{what}: degenerate model, φ″≡0")
    hyp = hypotheses(model)
    failed = [n for n in names if not hyp[n]]
    if failed:
        raise CapabilityError(f"{what}: " + "; ".join(f"{n}: failed" for n in failed))


def tail_scaling_check(model, x0, alpha, per_decade=8):
    """Check nu((r,inf)) <= C lam^alpha nu((lam r, inf)) for r < 1/x0, 0 < lam <= 1.

    Returns a dict with the worst constant, the pass flag and, for contrast,
    the worst constant of the reverse inequality
    nu((lam r, inf)) <= C lam^-alpha nu((r, inf)).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if model.levy is None:
        return {"pass": True, "constant": 1.0, "reverse_constant": 1.0, "vacuous": True}
    r_hi = GRID_HI if x0 <= 0 else min(GRID_HI, 1.0 / x0)
    r = log_grid(GRID_LO, r_hi, per_decade)
    lam = log_grid(1e-3, 1.0, per_decade)
    tails = {}

    def tail(v):
        key = float(v)
        if key not in tails:
            tails[key] = model.levy.tail(key)
        return tails[key]

    worst = 0.0
    worst_rev = 0.0
    for rv in r:
        for lv in lam:
            t_r, t_lr = tail(rv), tail(lv * rv)
            if t_lr <= 0:
                continue
            worst = max(worst, t_r / (lv ** alpha * t_lr))
            if t_r > 0:
                worst_rev = max(worst_rev, t_lr * lv ** alpha / t_r)
            else:
                worst_rev = np.inf
    ok = bool(np.isfinite(worst) and worst < 1e6)
    return {"pass": ok, "constant": float(worst), "reverse_constant": float(worst_rev),
            "reverse_pass": bool(np.isfinite(worst_rev) and worst_rev < 1e6),
            "vacuous": False}


def inequality_audit(model, per_decade=16):
    """Worst empirical constants of the first-order inequality suite.

    Each entry has the constant, whether its hypothesis holds for the model,
    and a pass flag (failing only when the hypothesis holds but the constant
    is unbounded, above 1e6 or below 1e-6).
    """
    if model.degenerate or not np.any(np.asarray(model.deriv(np.array([1.0]), 2)) != 0):
        return {"skipped": True, "notice": "φ″≡0"}
    lo, hi = scaling_window(model)
    x = log_grid(lo, hi, per_decade)
    hyp = hypotheses(model)
    b = model.drift
    phi = np.asarray(model.phi(x))
    d1 = np.asarray(model.deriv(x, 1))
    d2 = np.asarray(model.deriv(x, 2))
    d3 = np.asarray(model.deriv(x, 3))
    prof = varphi_profile(model)
    vphi = prof.varphi(x)
    vstar = np.array([prof.sup_star(v) for v in x])
    out = {"skipped": False}

    def entry(name, values, kind, hyp_ok):
        const = float(values.min() if kind == "min" else values.max())
        bounded = (const > 1e-6) if kind == "min" else (const < 1e6)
        out[name] = {"constant": const, "range": [float(values.min()), float(values.max())],
                     "kind": kind, "hypothesis": bool(hyp_ok),
                     "pass": bool(bounded or not hyp_ok)}

    entry("f >= C x|f'| for f=-phi''", -d2 / (x * d3), "min", hyp[WLSC_D2])
    entry("x phi' <= phi <= C x phi'", (phi - b * x) / (x * (d1 - b)), "max", hyp[WLSC_PHI])
    entry("phi' <= C/(1-beta) x(-phi'') + b", (d1 - b) / (x * -d2), "max", hyp[WUSC_D2])
    entry("varphi* ~ phi", vstar / phi, "max", hyp[WLSC_D2] and hyp[WUSC_D2] and b == 0)
    entry("phi - x phi' <= C varphi", (phi - x * d1) / vphi, "max", hyp[WLSC_D2])
    if model.levy is not None:
        m2 = np.array([model.levy.moment(2, 1.0 / v) for v in x[::4]])
        entry("C(-phi'') <= int_(0,1/x) s^2 nu", m2 / -d2[::4], "min", hyp[WLSC_D2])
        r = np.logspace(-2, 2, 9)
        pp = psi_profile(model)
        ratios = np.array([pp.inverse(v) / prof.inverse(v) for v in r])
        entry("psi^-1 ~ varphi^-1", ratios, "max", hyp[WLSC_D2])
    out["A(x0)"] = (float(vstar[0] / phi[0]) if model.x0 > 0 else None)
    return out
