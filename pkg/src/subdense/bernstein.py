"""Subordinator models and evaluation of the Laplace exponent.

A model is drift b plus a Levy density nu on (0, inf).  The Laplace
exponent is

    phi(lam) = b lam + int (1 - exp(-lam s)) nu(ds)

and its derivatives come from differentiating under the integral.  Builtin
families also carry closed forms valid in the cut complex plane; those are
used whenever available, quadrature otherwise.
"""
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from .errors import ModelInvalidError, ModelSpecError, NumericalIntegrityError
from .levy import (LevyDensity, Power, PowerLog, Tempered, levy_from_dict,
                   stable_constant)
from .quadrature import log_integral, oscillatory_tail


def _falling(a, n):
    out = 1.0
    for k in range(n):
        out *= a - k
    return out


class Exponent:
    """Closed form of the jump part of phi, valid for complex arguments."""

    # True when the formula continues analytically across Re z = 0 away from
    # a cut on the negative real axis, so the inversion contour may bend left
    analytic = True
    # real branch point; the formula holds for real z above it
    branch_point = 0.0

    def value(self, z):
        raise NotImplementedError

    def deriv(self, z, n):
        raise NotImplementedError

    def d1_at_zero(self):
        return np.inf


class StableExponent(Exponent):
    """kappa z^alpha."""

    def __init__(self, kappa, alpha):
        self.kappa = kappa
        self.alpha = alpha

    def value(self, z):
        return self.kappa * np.power(z, self.alpha)

    def deriv(self, z, n):
        return self.kappa * _falling(self.alpha, n) * np.power(z, self.alpha - n)


class TemperedExponent(Exponent):
    """kappa ((theta + z)^alpha - theta^alpha)."""

    def __init__(self, kappa, alpha, theta):
        self.kappa = kappa
        self.alpha = alpha
        self.theta = theta
        self.branch_point = -theta

    def value(self, z):
        a, th = self.alpha, self.theta
        # theta^a * expm1(a log1p(z/theta)) avoids cancellation for small z
        return self.kappa * th ** a * np.expm1(a * np.log1p(np.asarray(z) / th))

    def deriv(self, z, n):
        return self.kappa * _falling(self.alpha, n) * np.power(self.theta + np.asarray(z),
                                                               self.alpha - n)

    def d1_at_zero(self):
        return self.kappa * self.alpha * self.theta ** (self.alpha - 1.0)


class GammaExponent(Exponent):
    """c log(1 + z/theta)."""

    def __init__(self, c, theta):
        self.c = c
        self.theta = theta
        self.branch_point = -theta

    def value(self, z):
        return self.c * np.log1p(np.asarray(z) / self.theta)

    def deriv(self, z, n):
        sign = 1.0 if n % 2 else -1.0
        return sign * self.c * gamma_fn(n) / np.power(self.theta + np.asarray(z), n)

    def d1_at_zero(self):
        return self.c / self.theta


class LogStableExponent(Exponent):
    """z^alpha log^sigma(2 + z)."""

    def __init__(self, alpha, sigma):
        self.alpha = alpha
        self.sigma = sigma

    def _parts(self, z):
        z = np.asarray(z)
        u = 1.0 / (2.0 + z)
        L = np.log(2.0 + z)
        s = self.sigma
        g = [L ** s,
             s * L ** (s - 1) * u,
             (s * (s - 1) * L ** (s - 2) - s * L ** (s - 1)) * u ** 2,
             (s * (s - 1) * (s - 2) * L ** (s - 3) - 3 * s * (s - 1) * L ** (s - 2)
              + 2 * s * L ** (s - 1)) * u ** 3]
        f = [_falling(self.alpha, k) * np.power(z, self.alpha - k) for k in range(4)]
        return f, g

    def value(self, z):
        f, g = self._parts(z)
        return f[0] * g[0]

    def deriv(self, z, n):
        f, g = self._parts(z)
        binom = {1: (1, 1), 2: (1, 2, 1), 3: (1, 3, 3, 1)}[n]
        return sum(binom[k] * f[n - k] * g[k] for k in range(n + 1))


class SurrogateExponent(Exponent):
    """f(z) = int z u / (z u + 1) nu(du), evaluated by quadrature."""

    analytic = False

    def __init__(self, levy):
        self.levy = levy

    def _real(self, lam, n):
        ld = self.levy.log_density_y
        if n == 0:
            def logf(y):
                lu = np.log(lam) + y
                return lu - np.logaddexp(0.0, lu) + ld(y) + y
        else:
            def logf(y):
                lu = np.log(lam) + y
                return (np.log(gamma_fn(n + 1)) + n * y - (n + 1) * np.logaddexp(0.0, lu)
                        + ld(y) + y)
        val, _ = log_integral(logf, -np.log(lam))
        return val

    def _complex(self, z, n):
        ld = self.levy.log_density_y
        split = -np.log(abs(z))

        def g(y, part):
            u = np.exp(y)
            with np.errstate(all="ignore"):
                w = np.exp(ld(y) + y)
                if n == 0:
                    k = z * u / (z * u + 1.0)
                else:
                    k = gamma_fn(n + 1) * u ** n / (1.0 + z * u) ** (n + 1)
                v = (k * w).real if part == 0 else (k * w).imag
            return float(v) if np.isfinite(v) else 0.0

        out = []
        for part in (0, 1):
            a, _ = quad(g, -np.inf, split, args=(part,), limit=500, epsabs=0, epsrel=1e-11)
            b, _ = quad(g, split, np.inf, args=(part,), limit=500, epsabs=0, epsrel=1e-11)
            out.append(a + b)
        return complex(out[0], out[1])

    def _signed(self, v, n):
        return v if n in (0, 1, 3) else -v

    def value(self, z):
        return self._map(z, 0)

    def deriv(self, z, n):
        return self._map(z, n)

    def _map(self, z, n):
        z = np.asarray(z)
        flat = z.ravel()
        if np.iscomplexobj(flat):
            vals = np.array([self._signed(self._complex(complex(v), n), n) for v in flat])
        else:
            vals = np.array([self._signed(self._real(float(v), n), n) for v in flat])
        return vals.reshape(z.shape) if z.ndim else vals[0]

    def d1_at_zero(self):
        return self.levy.moment(1, np.inf) if hasattr(self.levy, "moment") else np.inf


class SurrogateLevy(LevyDensity):
    """Levy density m(s) = int u^-1 exp(-s/u) nu(du) of the surrogate."""

    kind = "surrogate"

    def __init__(self, base):
        self.base = base

    def _one(self, y):
        ld = self.base.log_density_y
        s = np.exp(y)

        def logf(v):
            # v = log u; integrand u^-1 e^{-s/u} nu(u) u
            return -s * np.exp(-v) + ld(v)

        val, _ = log_integral(logf, y)
        return np.log(val) if val > 0 else -np.inf

    def log_density_y(self, y):
        y = np.asarray(y, dtype=float)
        out = np.array([self._one(float(v)) for v in y.ravel()])
        return out.reshape(y.shape) if y.ndim else out[0]


@dataclass(frozen=True, eq=False)
class Model:
    """Immutable subordinator model.

    Parameters
    ----------
    family : str
        Label of the builtin family or ``"custom"``.
    drift : float
        Nonnegative drift b.
    levy : LevyDensity or None
        Levy density; None for a pure drift or for models known only
        through their exponent.
    exponent : Exponent or None
        Closed form of the jump part of phi.
    x0 : float
        Threshold above which the scaling conditions are asserted.
    params : dict
        Parameters as given in the model document.
    declared_monotone : bool
        Whether the jump density is (almost) monotone when ``levy`` is None.
    force_quadrature : bool
        Ignore ``exponent`` and integrate against ``levy``.
    """

    family: str
    drift: float = 0.0
    levy: LevyDensity = None
    exponent: Exponent = None
    x0: float = 0.0
    params: dict = field(default_factory=dict)
    declared_monotone: bool = False
    force_quadrature: bool = False

    def __post_init__(self):
        if not self.drift >= 0:
            raise ModelSpecError("drift must be nonnegative", field="drift")
        if self.force_quadrature and self.levy is None:
            raise ModelInvalidError("quadrature requested but no Levy density available")

    # structural info --------------------------------------------------
    @property
    def uses_closed_form(self):
        return self.exponent is not None and not self.force_quadrature

    @property
    def degenerate(self):
        return self.levy is None and self.exponent is None

    @property
    def analytic(self):
        return self.uses_closed_form and self.exponent.analytic

    @property
    def monotone_density(self):
        if self.levy is not None:
            return bool(np.isfinite(self.levy.mono_constant))
        return self.declared_monotone

    def with_quadrature(self):
        return replace(self, force_quadrature=True)

    def without_drift(self):
        return replace(self, drift=0.0)

    def to_dict(self):
        d = {"family": self.family, **self.params}
        if self.drift:
            d["drift"] = self.drift
        return d

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items() if k != "levy")
        return f"Model({self.family}{', ' if inner else ''}{inner}, b={self.drift})"

    # jump part ----------------------------------------------------------
    def jump_phi(self, lam):
        if self.degenerate:
            return np.zeros_like(np.asarray(lam, dtype=float))
        if self.uses_closed_form:
            return self.exponent.value(np.asarray(lam, dtype=float))
        return _map_real(lambda v: _quad_phi(self.levy, v), lam)

    def jump_deriv(self, lam, n):
        if self.degenerate:
            return np.zeros_like(np.asarray(lam, dtype=float))
        if self.uses_closed_form:
            return self.exponent.deriv(np.asarray(lam, dtype=float), n)
        sign = 1.0 if n % 2 else -1.0
        return _map_real(lambda v: sign * _quad_moment(self.levy, v, n), lam)

    def jump_phi_complex(self, z):
        """Jump part of phi at complex points (vectorized for closed forms)."""
        z = np.asarray(z, dtype=complex)
        if self.degenerate:
            return np.zeros_like(z)
        if self.uses_closed_form:
            return self.exponent.value(z)
        flat = z.ravel()
        vals = np.array([_quad_phi_complex(self.levy, v.real, v.imag) for v in flat])
        return vals.reshape(z.shape)

    def jump_deriv_complex(self, z, n):
        z = np.asarray(z, dtype=complex)
        if self.degenerate:
            return np.zeros_like(z)
        if self.uses_closed_form:
            return self.exponent.deriv(z, n)
        raise NotImplementedError("complex derivatives need a closed form")

    # full exponent -----------------------------------------------------------
    def phi(self, lam):
        return self.drift * np.asarray(lam, dtype=float) + self.jump_phi(lam)

    def deriv(self, lam, n):
        out = self.jump_deriv(lam, n)
        return out + self.drift if n == 1 else out

    def phi_complex(self, z):
        z = np.asarray(z, dtype=complex)
        return self.drift * z + self.jump_phi_complex(z)

    def dphi_at_zero(self):
        """phi'(0+), possibly infinite."""
        if self.degenerate:
            return self.drift
        if self.uses_closed_form:
            return self.drift + self.exponent.d1_at_zero()
        return self.drift + self.levy.moment(1, np.inf)


def _map_real(fn, lam):
    arr = np.asarray(lam, dtype=float)
    vals = np.array([fn(float(v)) for v in arr.ravel()])
    return vals.reshape(arr.shape) if arr.ndim else float(vals[0])


def _quad_phi(levy, lam):
    ld = levy.log_density_y

    def logf(y):
        with np.errstate(all="ignore"):
            return np.log(-np.expm1(-lam * np.exp(y))) + ld(y) + y

    val, bad = log_integral(logf, -np.log(lam), rtol=1e-12)
    if not np.isfinite(val):
        raise ModelInvalidError(f"phi({lam}) integral does not converge")
    return val


def _quad_moment(levy, lam, n):
    ld = levy.log_density_y

    def logf(y):
        with np.errstate(all="ignore"):
            return n * y - lam * np.exp(y) + ld(y) + y

    val, _ = log_integral(logf, -np.log(lam), rtol=1e-12)
    if not np.isfinite(val):
        raise ModelInvalidError(f"derivative integral of order {n} diverges at {lam}")
    return val


def _quad_phi_complex(levy, w, lam):
    """phi_J(w + i lam) by quadrature, w >= 0."""
    if lam == 0:
        return complex(_quad_phi(levy, w) if w > 0 else 0.0, 0.0)
    if lam < 0:
        return _quad_phi_complex(levy, w, -lam).conjugate()
    ld = levy.log_density_y
    base = _quad_phi(levy, w) if w > 0 else 0.0
    y_cut = -np.log(lam)

    def log_head_re(y):
        s = np.exp(y)
        with np.errstate(all="ignore"):
            return np.log(2.0) + 2 * np.log(np.abs(np.sin(0.5 * lam * s))) - w * s + ld(y) + y

    def log_head_im(y):
        s = np.exp(y)
        with np.errstate(all="ignore"):
            return np.log(np.sin(lam * s)) - w * s + ld(y) + y

    def log_tail(y):
        with np.errstate(all="ignore"):
            return -w * np.exp(y) + ld(y) + y

    def g(s):
        with np.errstate(all="ignore"):
            v = np.exp(ld(np.log(s)) - w * s)
        return float(v) if np.isfinite(v) else 0.0

    head_re, _ = log_integral(log_head_re, y_cut - 1.0, y_hi=y_cut)
    head_im, _ = log_integral(log_head_im, y_cut - 1.0, y_hi=y_cut)
    tail_mass, _ = log_integral(log_tail, y_cut + 1.0, y_lo=y_cut)
    a = 1.0 / lam
    def log_g(s):
        return float(ld(np.log(s))) - w * s

    tail_cos = oscillatory_tail(g, a, lam, "cos", log_g)
    tail_sin = oscillatory_tail(g, a, lam, "sin", log_g)
    re = base + head_re + tail_mass - tail_cos
    im = head_im + tail_sin
    return complex(re, im)


# builtin families ------------------------------------------------------------

def stable(alpha, c=None, drift=0.0):
    """Stable subordinator; with c omitted phi(lam) = lam^alpha exactly."""
    if not 0 < alpha < 1:
        raise ModelSpecError("stable family needs 0 < alpha < 1", field="alpha")
    cc = stable_constant(alpha) if c is None else float(c)
    kappa = cc * gamma_fn(1.0 - alpha) / alpha
    params = {"alpha": alpha} if c is None else {"c": cc, "alpha": alpha}
    return Model("stable", drift=drift, levy=Power(cc, alpha),
                 exponent=StableExponent(kappa, alpha), params=params)


def power(c, alpha, drift=0.0):
    m = stable(alpha, c=c, drift=drift)
    return replace(m, family="power")


def tempered(c, alpha, theta, drift=0.0):
    lev = Tempered(c, alpha, theta)
    if alpha == 0:
        exp = GammaExponent(c, theta)
    else:
        exp = TemperedExponent(c * gamma_fn(1.0 - alpha) / alpha, alpha, theta)
    return Model("tempered", drift=drift, levy=lev, exponent=exp, x0=float(theta),
                 params={"c": c, "alpha": alpha, "theta": theta})


def gamma_subordinator(c=1.0, theta=1.0, drift=0.0):
    m = tempered(c, 0.0, theta, drift=drift)
    return replace(m, family="gamma", params={"c": c, "theta": theta})


def power_log(c, alpha, sigma, drift=0.0):
    return Model("power_log", drift=drift, levy=PowerLog(c, alpha, sigma),
                 params={"c": c, "alpha": alpha, "sigma": sigma})


def log_stable(alpha, sigma):
    """phi(s) = s^alpha log^sigma(2+s); known through its exponent only."""
    if not 0 < alpha < 1:
        raise ModelSpecError("log_stable family needs 0 < alpha < 1", field="alpha")
    return Model("log_stable", exponent=LogStableExponent(alpha, sigma),
                 params={"alpha": alpha, "sigma": sigma}, declared_monotone=True)


def pure_drift(b):
    return Model("drift", drift=float(b), params={})


def custom(levy, drift=0.0, x0=0.0):
    levy.check_integrable()
    exp = None
    if isinstance(levy, Power):
        exp = StableExponent(levy.c * gamma_fn(1 - levy.alpha) / levy.alpha, levy.alpha)
    elif isinstance(levy, Tempered):
        exp = tempered(levy.c, levy.alpha, levy.theta).exponent
    return Model("custom", drift=drift, levy=levy, exponent=exp, x0=float(x0),
                 params={"levy": {"kind": levy.kind, **levy.params()}, "x0": x0})


def _num(d, key, default=None, required=True):
    if key not in d:
        if required and default is None:
            raise ModelSpecError(f"missing required field '{key}'", field=key)
        return default
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ModelSpecError(f"expected a number, got {type(v).__name__}", field=key)
    return float(v)


def model_from_dict(d):
    """Build a model from a parsed model document."""
    if not isinstance(d, dict):
        raise ModelSpecError("model document must be a JSON object")
    fam = d.get("family")
    if fam is None:
        raise ModelSpecError("missing required field 'family'", field="family")
    drift = _num(d, "drift", 0.0, required=False)
    if fam == "stable":
        return stable(_num(d, "alpha"), c=_num(d, "c", required=False), drift=drift)
    if fam == "power":
        return power(_num(d, "c"), _num(d, "alpha"), drift=drift)
    if fam == "tempered":
        return tempered(_num(d, "c"), _num(d, "alpha"), _num(d, "theta"), drift=drift)
    if fam == "gamma":
        return gamma_subordinator(_num(d, "c", 1.0, required=False),
                                  _num(d, "theta", 1.0, required=False), drift=drift)
    if fam == "power_log":
        return power_log(_num(d, "c"), _num(d, "alpha"), _num(d, "sigma"), drift=drift)
    if fam == "log_stable":
        if drift:
            raise ModelSpecError("log_stable family has no drift", field="drift")
        return log_stable(_num(d, "alpha"), _num(d, "sigma"))
    if fam == "drift":
        return pure_drift(drift)
    if fam == "custom":
        if "levy" not in d:
            if drift > 0:
                return pure_drift(drift)
            raise ModelSpecError("custom model needs 'levy' or a positive drift", field="levy")
        return custom(levy_from_dict(d["levy"]), drift=drift,
                      x0=_num(d, "x0", 0.0, required=False))
    raise ModelSpecError(f"unknown family {fam!r}", field="family")


def load_model(path):
    """Read a JSON model document, reporting the offending line on syntax errors."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSpecError(exc.msg, line=exc.lineno) from None
    try:
        return model_from_dict(doc)
    except ModelSpecError as exc:
        if exc.line is not None or exc.field is None:
            raise
        key = f'"{exc.field.split(".")[-1]}"'
        line = next((i for i, row in enumerate(text.splitlines(), 1) if key in row), None)
        msg = str(exc).split("] ", 1)[-1]
        raise ModelSpecError(msg, field=exc.field, line=line) from None


# public operations ----------------------------------------------------------------

@dataclass(frozen=True)
class ComplexExponentValue:
    re: float
    im: float


def _check_positive(lam):
    arr = np.asarray(lam, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("lambda must be positive")
    return arr


def eval_phi(model, lam):
    """Laplace exponent at lam > 0."""
    _check_positive(lam)
    return model.phi(lam)


def eval_phi_derivatives(model, lam, order):
    """Derivative of the requested order (1..3) with its sign pattern enforced."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    _check_positive(lam)
    val = model.deriv(lam, order)
    arr = np.asarray(val)
    sign = -1.0 if order == 2 else 1.0
    if np.any(sign * arr < 0):
        raise NumericalIntegrityError(
            f"derivative of order {order} has the wrong sign at some point")
    return val


def eval_phi_complex(model, w, lam):
    """phi(w + i lam) for w >= 0 as a ComplexExponentValue."""
    if w < 0:
        raise ValueError("w must be nonnegative")
    if w == 0 and lam == 0:
        return ComplexExponentValue(0.0, 0.0)
    v = complex(model.phi_complex(complex(w, lam)))
    return ComplexExponentValue(v.real, v.imag)


def bernstein_invariants(model, grid=None):
    """Check phi(0)=0, monotonicity, concavity, subadditivity and the moment bounds.

    Returns a dict with the worst slack of each check (nonnegative means it holds).
    """
    lam = np.logspace(-4, 4, 20) if grid is None else np.asarray(grid)
    phi = np.asarray(model.phi(lam))
    d1 = np.asarray(model.deriv(lam, 1))
    d2 = np.asarray(model.deriv(lam, 2))
    out = {"phi_zero": float(model.phi(1e-300)),
           "nondecreasing": float(np.min(np.diff(phi)) / phi.max()),
           "derivative_nonincreasing": float(np.min(-np.diff(d1)) / max(d1.max(), 1e-300))}
    slack = np.inf
    for k in (2.0, 10.0, 100.0):
        lhs = np.asarray(model.phi(k * lam))
        slack = min(slack, float(np.min((k * phi - lhs) / (k * phi))))
    out["subadditive"] = slack
    out["moment_n1"] = float(np.min((phi - lam * d1) / phi))
    out["moment_n2"] = float(np.min((phi + 0.5 * lam ** 2 * d2) / phi))
    return out


def complete_bernstein_surrogate(model, grid=None):
    """Complete Bernstein function comparable to phi, with comparison constants.

    Returns ``(surrogate, report)`` where the report holds the range of
    f/phi and of f''/phi'' over the grid.
    """
    if model.levy is None:
        if model.degenerate:
            return model, {"phi_ratio": (1.0, 1.0), "d2_ratio": None, "identity": True}
        raise ModelInvalidError("surrogate needs the Levy density")
    sur = Model(model.family + "_cbf", drift=model.drift, levy=SurrogateLevy(model.levy),
                exponent=SurrogateExponent(model.levy), x0=model.x0,
                params=dict(model.params))
    lam = np.logspace(-3, 3, 25) if grid is None else np.asarray(grid)
    f = np.asarray(sur.phi(lam))
    p = np.asarray(model.phi(lam))
    f2 = np.asarray(sur.deriv(lam, 2))
    p2 = np.asarray(model.deriv(lam, 2))
    r1 = f / p
    r2 = f2 / p2
    return sur, {"phi_ratio": (float(r1.min()), float(r1.max())),
                 "d2_ratio": (float(r2.min()), float(r2.max())), "identity": False}
