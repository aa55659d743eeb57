"""Monte Carlo oracles: compound-Poisson sampling of T_t, an exact half-stable sampler,
path maxima for the concentration bound, and a kernel density estimate.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ks_2samp, norm

from .errors import CapabilityError
from .parallel import fan_out
from .scaling import compensator, concentration_h

CHUNK = 4096
JUMP_BLOCK = 2_000_000
PRUITT_CONSTANT = 10.0


@dataclass
class EmpiricalDist:
    samples: np.ndarray
    t: float
    seed: int
    eps: float = 0.0
    drift: float = 0.0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.sort(np.asarray(self.samples, dtype=float))

    @property
    def n(self):
        return self.samples.size

    def cdf(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.n

    def ks(self, cdf):
        """sup |F_n - F| against a vectorized CDF."""
        f = cdf(self.samples)
        i = np.arange(1, self.n + 1)
        return float(max((i / self.n - f).max(), (f - (i - 1) / self.n).max()))

    def summary(self, quantiles=(0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99)):
        q = np.quantile(self.samples, quantiles)
        out = {"n": self.n, "t": self.t, "seed": self.seed, "eps": self.eps,
               "min": float(self.samples[0]), "max": float(self.samples[-1]),
               "quantiles": {str(k): float(v) for k, v in zip(quantiles, q)},
               "mean_exp_minus_1": float(np.exp(-self.samples).mean()), **self.notes}
        return out


class JumpSampler:
    """Draws from nu restricted to (eps, inf) by inverting its tabulated tail."""

    def __init__(self, levy, eps):
        self.y, self.log_tail = levy.tail_table(eps)
        self.rate = float(np.exp(self.log_tail[0]))
        self.slope = (self.log_tail[-1] - self.log_tail[-2]) / (self.y[-1] - self.y[-2])

    def draw(self, rng, size):
        target = self.log_tail[0] + np.log(rng.random(size))
        y = np.interp(-target, -self.log_tail, self.y)
        beyond = target < self.log_tail[-1]
        y[beyond] = self.y[-1] + (target[beyond] - self.log_tail[-1]) / self.slope
        return np.exp(y)


def _streams(seed, n_chunks):
    return [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(seed).spawn(n_chunks)]


def _compound_sums(jumps, rng, counts):
    """Per-sample sums of counts[i] jumps, drawn in bounded blocks."""
    out = np.zeros(counts.size)
    start = 0
    while start < counts.size:
        csum = np.cumsum(counts[start:])
        stop = start + max(1, int(np.searchsorted(csum, JUMP_BLOCK, side="right")))
        c = counts[start:stop]
        total = int(c.sum())
        if total:
            j = jumps.draw(rng, total)
            idx = np.repeat(np.arange(c.size), c)
            out[start:stop] = np.bincount(idx, weights=j, minlength=c.size)
        start = stop
    return out


def sample(model, t, n, eps=1e-6, seed=0):
    """n samples of T_t: t b_eps plus a compound-Poisson sum of jumps above eps."""
    if not t > 0 or n < 1:
        raise ValueError("need t > 0 and n >= 1")
    if model.degenerate:
        return EmpiricalDist(np.full(n, t * model.drift), t, seed, eps, model.drift)
    if model.levy is None:
        raise CapabilityError("sampling needs the Levy density, which this model does not provide")
    drift = compensator(model, eps)
    jumps = JumpSampler(model.levy, eps)
    mean_count = t * jumps.rate
    notes = {"jump_rate": jumps.rate, "mean_jumps": mean_count,
             "omitted_variance": t * model.levy.moment(2, eps)}
    if mean_count == 0:
        warnings.warn("no jumps above eps: the sample is a pure drift")
    sizes = [min(CHUNK, n - i) for i in range(0, n, CHUNK)]
    rngs = _streams(seed, len(sizes))

    def one(k):
        rng = rngs[k]
        counts = rng.poisson(mean_count, sizes[k])
        return t * drift + _compound_sums(jumps, rng, counts)

    parts = fan_out(one, range(len(sizes)))
    return EmpiricalDist(np.concatenate(parts), t, seed, eps, drift, notes)


def half_stable_exact_sampler(t, n, seed=0):
    """Exact samples t^2 / (2 N^2) of the subordinator with phi = sqrt(lambda)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    z = rng.standard_normal(n)
    return EmpiricalDist(t * t / (2.0 * z * z), t, seed, notes={"exact": True})


def half_stable_cdf(t, x):
    """P(T_t <= x) = 2 (1 - Phi(t / sqrt(2x))) for the half-stable subordinator."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, 2.0 * norm.sf(t / np.sqrt(2.0 * np.maximum(x, 1e-300))), 0.0)


def ks_two_sample(a, b):
    return float(ks_2samp(a.samples, b.samples).statistic)


def path_sup_deviation(model, t, lam, n, eps, seed=0):
    """Samples of sup_{s <= t} |T_s - s b_lam| over simulated paths.

    Between jumps the centred path moves linearly with slope b_eps - b_lam,
    so the supremum is attained just before or after a jump or at t.
    """
    if model.degenerate:
        return np.zeros(n)
    slope = compensator(model, eps) - compensator(model, lam)
    jumps = JumpSampler(model.levy, eps)
    rngs = _streams(seed, (n + CHUNK - 1) // CHUNK)

    def one(k):
        rng = rngs[k]
        m = min(CHUNK, n - k * CHUNK)
        counts = rng.poisson(t * jumps.rate, m)
        total = int(counts.sum())
        times = rng.random(total) * t
        sizes = jumps.draw(rng, total)
        path = np.repeat(np.arange(m), counts)
        order = np.lexsort((times, path))
        times, sizes = times[order], sizes[order]
        # running jump sums restarted at each path
        csum = np.concatenate(([0.0], np.cumsum(sizes)))
        starts = np.cumsum(counts) - counts
        offs = csum[starts]
        after = csum[1:] - np.repeat(offs, counts) + slope * times
        before = after - sizes
        best = np.abs(csum[starts + counts] - offs + slope * t)
        if total:
            np.maximum.at(best, path, np.maximum(np.abs(after), np.abs(before)))
        return best

    return np.concatenate(fan_out(one, range(len(rngs))))


def pruitt_check(model, t_grid, lam_grid, n=20000, eps_factor=1e-3, seed=0,
                 constant=PRUITT_CONSTANT):
    """MC estimate of P(sup |T_s - s b_lam| >= lam) against t h(lam)."""
    if model.degenerate:
        return {"rows": [{"t": t, "lambda": lam, "probability": 0.0, "ratio": 0.0}
                         for t in t_grid for lam in lam_grid],
                "max_ratio": 0.0, "passed": True}
    if model.levy is None:
        raise CapabilityError("path simulation needs the Levy density")
    rows = []
    for i, t in enumerate(t_grid):
        for j, lam in enumerate(lam_grid):
            dev = path_sup_deviation(model, t, lam, n, eps_factor * lam,
                                     seed=[seed, i, j])
            p = float(np.mean(dev >= lam))
            bound = t * concentration_h(model, lam)
            rows.append({"t": float(t), "lambda": float(lam), "probability": p,
                         "std_error": float(np.sqrt(p * (1 - p) / n)),
                         "t_h": bound, "ratio": p / bound})
    mx = max(r["ratio"] for r in rows)
    return {"rows": rows, "max_ratio": mx, "constant": constant, "constant_kind": "empirical",
            "passed": bool(mx <= constant)}


def empirical_density(dist, x_grid, log_scale=True, reflect=False):
    """Gaussian kernel estimate of the density of dist on x_grid.

    With ``log_scale`` the estimate is built for log(x - t b) and mapped
    back, which keeps the bandwidth meaningful for heavy tails; otherwise a
    linear-scale estimate is used, optionally reflected at t b.
    """
    x = np.asarray(x_grid, dtype=float)
    if np.ptp(dist.samples) == 0:
        raise ValueError("degenerate sample: zero bandwidth")
    edge = dist.t * dist.drift
    out = np.zeros_like(x)
    inside = x > edge
    if log_scale:
        data = np.log(np.maximum(dist.samples - edge, 1e-300))
        pts = np.log(x[inside] - edge)
    else:
        data = dist.samples
        pts = x[inside]
    bw = 1.06 * data.std() * data.size ** -0.2
    if not bw > 0:
        raise ValueError("degenerate sample: zero bandwidth")
    vals = _kde(data, pts, bw)
    if not log_scale and reflect:
        vals += _kde(2 * edge - data[::-1], pts, bw)
    if log_scale:
        vals = vals / (x[inside] - edge)
    out[inside] = vals
    return out


def _kde(sorted_data, pts, bw, reach=8.0):
    vals = np.empty(pts.size)
    lo = np.searchsorted(sorted_data, pts - reach * bw)
    hi = np.searchsorted(sorted_data, pts + reach * bw)
    for k, (a, b) in enumerate(zip(lo, hi)):
        u = (sorted_data[a:b] - pts[k]) / bw
        vals[k] = np.exp(-0.5 * u * u).sum()
    return vals / (sorted_data.size * bw * np.sqrt(2 * np.pi))
