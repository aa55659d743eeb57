"""Levy densities on (0, inf) for subordinators.

Every density exposes its logarithm as a function of y = log s so that the
quadrature layer never forms s**(-1-alpha) directly.
"""
import numpy as np
from scipy.special import gammaln

from .errors import ModelInvalidError, ModelSpecError
from .quadrature import log_integral


def _log_expm1_ratio(d):
    # log((exp(d) - 1) / d), stable for d near 0 and for large |d|
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    small = np.abs(d) < 1e-8
    out[small] = 0.5 * d[small]
    pos = (~small) & (d > 0)
    out[pos] = d[pos] + np.log(-np.expm1(-d[pos])) - np.log(d[pos])
    neg = (~small) & (d < 0)
    out[neg] = np.log(-np.expm1(d[neg])) - np.log(-d[neg])
    return out


class LevyDensity:
    """Base class. Subclasses implement ``log_density_y``."""

    kind = "abstract"
    monotone = True
    mono_constant = 1.0

    def log_density_y(self, y):
        raise NotImplementedError

    def log_density(self, s):
        with np.errstate(divide="ignore"):
            return self.log_density_y(np.log(s))

    def density(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(self.log_density(s[pos]))
        return out if out.ndim else float(out)

    def params(self):
        return {}

    # generic integrals -------------------------------------------------
    def tail(self, r):
        """Mass nu((r, inf))."""
        if r <= 0:
            return np.inf
        y0 = np.log(r)
        val, _ = log_integral(lambda y: self.log_density_y(y) + y, y0 + 1.0, y_lo=y0)
        return val

    def moment(self, k, r):
        """Truncated moment of order k over (0, r)."""
        if r <= 0:
            return 0.0
        y0 = np.log(r)
        val, _ = log_integral(lambda y: self.log_density_y(y) + (k + 1) * y,
                              y0 - 1.0, y_hi=y0)
        return val

    def scaled_moment(self, k, r):
        """r^-k times the truncated moment of order k over (0, r)."""
        if r <= 0:
            return 0.0
        y0 = np.log(r)
        val, _ = log_integral(lambda y: self.log_density_y(y) + (k + 1) * y - k * y0,
                              y0 - 1.0, y_hi=y0)
        return val

    def small_jump_mean(self, r):
        return self.moment(1, r)

    def check_integrable(self):
        """Return the value of int min(1, s) nu(ds); raise if it diverges."""
        head, bad1 = log_integral(lambda y: self.log_density_y(y) + 2 * y, -1.0, y_hi=0.0)
        tail, bad2 = log_integral(lambda y: self.log_density_y(y) + y, 1.0, y_lo=0.0)
        total = head + tail
        if not np.isfinite(total) or bad1 or bad2:
            raise ModelInvalidError(
                "integral of min(1, s) against the Levy density does not converge")
        return total

    # tabulated tail for inverse-CDF sampling ---------------------------
    def tail_table(self, eps, per_unit=40):
        """Grid in y = log s from log(eps) with log nu((s, inf)) on it.

        The grid extends until the integrand in y has dropped by 45 e-folds
        below its peak; beyond that the log tail is extrapolated linearly.
        """
        y0 = np.log(eps)
        span = 8.0
        while True:
            y = np.linspace(y0, y0 + span, int(span * per_unit) + 1)
            g = self.log_density_y(y) + y
            if g[-1] < g.max() - 45.0 and g[-1] < g[-2]:
                break
            if span > 2000:
                raise ModelInvalidError("Levy tail too heavy to tabulate")
            span *= 2
        h = np.diff(y)
        d = np.diff(g)
        log_seg = np.log(h) + g[:-1] + _log_expm1_ratio(d)
        slope = d[-1] / h[-1]
        log_rest = g[-1] - np.log(-slope)
        rev = np.logaddexp.accumulate(np.concatenate(([log_rest], log_seg[::-1])))
        log_tail = rev[::-1]
        return y, log_tail


class Power(LevyDensity):
    """nu(s) = c s^(-1-alpha), 0 < alpha < 1."""

    kind = "power"

    def __init__(self, c, alpha):
        if not 0 < alpha < 1:
            raise ModelSpecError("power density needs 0 < alpha < 1", field="alpha")
        if c <= 0:
            raise ModelSpecError("power density needs c > 0", field="c")
        self.c = float(c)
        self.alpha = float(alpha)
        self._logc = np.log(self.c)

    def params(self):
        return {"c": self.c, "alpha": self.alpha}

    def log_density_y(self, y):
        return self._logc - (1.0 + self.alpha) * np.asarray(y, dtype=float)

    def tail(self, r):
        return self.c / self.alpha * r ** (-self.alpha)

    def moment(self, k, r):
        return self.c * r ** (k - self.alpha) / (k - self.alpha)

    def scaled_moment(self, k, r):
        return self.c * r ** (-self.alpha) / (k - self.alpha)


class PowerLog(LevyDensity):
    """nu(s) = c s^(-1-alpha) log^sigma(2 + 1/s)."""

    kind = "power_log"

    def __init__(self, c, alpha, sigma):
        if not 0 < alpha < 1:
            raise ModelSpecError("power_log density needs 0 < alpha < 1", field="alpha")
        if c <= 0:
            raise ModelSpecError("power_log density needs c > 0", field="c")
        self.c = float(c)
        self.alpha = float(alpha)
        self.sigma = float(sigma)
        self._logc = np.log(self.c)
        # for sigma >= 0 the density is decreasing; otherwise measure how far
        # from monotone it is on a wide grid
        self.mono_constant = 1.0
        if sigma < 0:
            ly = self.log_density_y(np.linspace(-40.0, 40.0, 4001))
            rmax = np.maximum.accumulate(ly[::-1])[::-1]
            self.mono_constant = float(np.exp(np.max(rmax - ly)))

    def params(self):
        return {"c": self.c, "alpha": self.alpha, "sigma": self.sigma}

    def log_density_y(self, y):
        y = np.asarray(y, dtype=float)
        loglog = np.log(np.logaddexp(np.log(2.0), -y))
        return self._logc - (1.0 + self.alpha) * y + self.sigma * loglog


class Tempered(LevyDensity):
    """nu(s) = c s^(-1-alpha) exp(-theta s), 0 <= alpha < 1 (alpha=0 is Gamma)."""

    kind = "tempered"

    def __init__(self, c, alpha, theta):
        if not 0 <= alpha < 1:
            raise ModelSpecError("tempered density needs 0 <= alpha < 1", field="alpha")
        if c <= 0:
            raise ModelSpecError("tempered density needs c > 0", field="c")
        if theta <= 0:
            raise ModelSpecError("tempered density needs theta > 0", field="theta")
        self.c = float(c)
        self.alpha = float(alpha)
        self.theta = float(theta)
        self._logc = np.log(self.c)

    def params(self):
        return {"c": self.c, "alpha": self.alpha, "theta": self.theta}

    def log_density_y(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore"):
            return self._logc - (1.0 + self.alpha) * y - self.theta * np.exp(y)


class Tabulated(LevyDensity):
    """Monotone density given at points, log-log linear in between.

    Outside the table the density continues as a power law with the declared
    exponents p0 (towards 0) and p_inf (towards infinity).
    """

    kind = "tabulated"

    def __init__(self, points, tail_exponents, mono_constant):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ModelSpecError("need at least two [s, nu(s)] pairs", field="points")
        if np.any(pts[:, 0] <= 0) or np.any(pts[:, 1] <= 0):
            raise ModelSpecError("abscissae and values must be positive", field="points")
        pts = pts[np.argsort(pts[:, 0])]
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ModelSpecError("abscissae must be distinct", field="points")
        if len(tail_exponents) != 2:
            raise ModelSpecError("need [p0, p_inf]", field="tail_exponents")
        self.p0, self.pinf = (float(v) for v in tail_exponents)
        self.ys = np.log(pts[:, 0])
        self.ls = np.log(pts[:, 1])
        self.mono_constant = float(mono_constant)
        if not self.p0 > -2.0:
            raise ModelInvalidError(
                f"density ~ s^{self.p0} at 0 makes int min(1,s) nu(ds) diverge (need p0 > -2)")
        if not self.pinf < -1.0:
            raise ModelInvalidError(
                f"density ~ s^{self.pinf} at infinity has infinite tail mass (need p_inf < -1)")
        worst = self.monotonicity_ratio()
        if worst > self.mono_constant * (1 + 1e-12):
            raise ModelInvalidError(
                f"almost-monotone check failed: sup nu(y)/nu(x) over y >= x is {worst:.6g}"
                f" > declared constant {self.mono_constant:.6g}")

    def params(self):
        return {"points": np.column_stack([np.exp(self.ys), np.exp(self.ls)]).tolist(),
                "tail_exponents": [self.p0, self.pinf],
                "mono_constant": self.mono_constant}

    def monotonicity_ratio(self):
        if self.p0 > 0 or self.pinf > 0:
            return np.inf
        # running max from the right over the knots covers the extrapolated
        # pieces too, since both are nonincreasing there
        rmax = np.maximum.accumulate(self.ls[::-1])[::-1]
        return float(np.exp(np.max(rmax - self.ls)))

    def log_density_y(self, y):
        y = np.asarray(y, dtype=float)
        out = np.interp(y, self.ys, self.ls)
        lo = y < self.ys[0]
        hi = y > self.ys[-1]
        out = np.where(lo, self.ls[0] + self.p0 * (y - self.ys[0]), out)
        out = np.where(hi, self.ls[-1] + self.pinf * (y - self.ys[-1]), out)
        return out

    def _exact(self, k, a, b):
        """Exact integral of s^k nu(s) ds over y in (a, b) using the piecewise form."""
        knots = self.ys
        inner = knots[(knots > a) & (knots < b)]
        ys = np.concatenate(([a], inner, [b]))
        total = 0.0
        for y1, y2 in zip(ys[:-1], ys[1:]):
            if np.isinf(y1) or np.isinf(y2):
                # power-law piece reaching 0 or infinity
                fin = y2 if np.isinf(y1) else y1
                slope = (self.p0 if np.isinf(y1) else self.pinf) + k + 1
                g = float(self.log_density_y(fin)) + (k + 1) * fin
                if (np.isinf(y1) and slope <= 0) or (np.isinf(y2) and slope >= 0):
                    return np.inf
                total += np.exp(g) / abs(slope)
                continue
            g1 = float(self.log_density_y(y1)) + (k + 1) * y1
            g2 = float(self.log_density_y(y2)) + (k + 1) * y2
            h = y2 - y1
            total += h * np.exp(g1 + _log_expm1_ratio(np.array([g2 - g1]))[0])
        return total

    def tail(self, r):
        if r <= 0:
            return np.inf
        return self._exact(0, np.log(r), np.inf)

    def moment(self, k, r):
        if r <= 0:
            return 0.0
        return self._exact(k, -np.inf, np.log(r))


def levy_from_dict(d):
    """Build a Levy density from its JSON description."""
    if not isinstance(d, dict):
        raise ModelSpecError("Levy description must be an object", field="levy")
    kind = d.get("kind")

    def need(key):
        if key not in d:
            raise ModelSpecError(f"missing '{key}' for kind '{kind}'", field=f"levy.{key}")
        v = d[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ModelSpecError("expected a number", field=f"levy.{key}")
        return float(v)

    if kind == "power":
        return Power(need("c"), need("alpha"))
    if kind == "power_log":
        return PowerLog(need("c"), need("alpha"), need("sigma"))
    if kind == "tempered":
        return Tempered(need("c"), need("alpha"), need("theta"))
    if kind == "tabulated":
        if "points" not in d:
            raise ModelSpecError("missing 'points'", field="levy.points")
        if "tail_exponents" not in d:
            raise ModelSpecError("missing 'tail_exponents'", field="levy.tail_exponents")
        return Tabulated(d["points"], d["tail_exponents"], d.get("mono_constant", 1.0))
    raise ModelSpecError(f"unknown Levy kind {kind!r}", field="levy.kind")


def stable_constant(alpha):
    """Coefficient c of c s^(-1-alpha) whose Laplace exponent is exactly lam^alpha."""
    return float(np.exp(np.log(alpha) - gammaln(1.0 - alpha)))
