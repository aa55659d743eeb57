"""Log-space quadrature helpers for integrals against power-like Levy densities.

Integrands are handled through their logarithm as a function of y = log s,
which keeps power singularities at 0 and heavy or exponential tails inside
the range of floating point numbers.
"""
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad

QUAD_LIMIT = 500


def _guarded(logf):
    def f(y):
        with np.errstate(all="ignore"):
            v = np.exp(logf(y))
        v = float(v)
        return v if np.isfinite(v) else 0.0
    return f


def log_integral(logf, y_split, y_lo=-np.inf, y_hi=np.inf, rtol=1e-12):
    """Integrate exp(logf(y)) over (y_lo, y_hi), split at y_split.

    Returns the value and a flag telling whether quad reported trouble.
    """
    f = _guarded(logf)
    y_split = min(max(y_split, y_lo), y_hi)
    total = 0.0
    trouble = False
    for a, b in ((y_lo, y_split), (y_split, y_hi)):
        if a >= b:
            continue
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", IntegrationWarning)
            val, _ = quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=QUAD_LIMIT)
        if any(issubclass(c.category, IntegrationWarning) for c in caught):
            trouble = True
        total += val
    return total, trouble


def oscillatory_tail(g, a, freq, kind, log_g=None):
    """Fourier-type integral of g over (a, inf) with weight cos or sin(freq*s).

    QAWF misbehaves on integrands that decay exponentially, so when ``log_g``
    shows a drop of 50 e-folds within 20 doublings of ``a`` the range is cut
    there and a finite weighted rule is used instead.
    """
    end = None
    if log_g is not None:
        ref = log_g(a)
        b = 2.0 * a
        for _ in range(20):
            if log_g(b) < ref - 50.0:
                end = b
                break
            b *= 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        if end is not None:
            val, _ = quad(g, a, end, weight=kind, wvar=freq, limit=QUAD_LIMIT,
                          epsabs=1e-15, epsrel=1e-12)
        else:
            val, _ = quad(g, a, np.inf, weight=kind, wvar=freq, limlst=200,
                          limit=QUAD_LIMIT, epsabs=1e-15, epsrel=1e-12)
    return val


def gauss_panels(edges, order=20):
    """Nodes and weights of composite Gauss-Legendre rules on consecutive panels."""
    gx, gw = np.polynomial.legendre.leggauss(order)
    a = np.asarray(edges[:-1], dtype=float)
    b = np.asarray(edges[1:], dtype=float)
    half = 0.5 * (b - a)
    nodes = half[:, None] * gx[None, :] + (0.5 * (a + b))[:, None]
    weights = half[:, None] * gw[None, :]
    return nodes, weights
