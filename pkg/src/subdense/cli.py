"""Command-line front end.

Exit codes: 0 success, 1 numerical-integrity failure (or a failed verify
suite), 2 a hypothesis needed by the command fails, 3 malformed model or
profile document.
"""
import argparse
import io
import json
import math
import sys

import numpy as np

from .bernstein import load_model
from .bounds import (envelope_audit, lower_bound_constant, sandwich_audit, sharp_estimate,
                     time_limit)
from .density import (M0_DEFAULT, density, distribution_function, laplace_roundtrip,
                      mass_audit)
from .errors import (CapabilityError, ModelInvalidError, ModelSpecError,
                     NumericalIntegrityError, OutOfRangeError, SupportError)
from .green_heat import (green, green_transform_identity, heat_kernel_subordinated,
                         profile_from_dict, require_green)
from .parallel import atomic_write, fan_out
from .sampler import sample
from .scaling import (WLSC_D2, hypotheses, inequality_audit, log_grid, parse_grid,
                      require, scaling_reports, scaling_window)

DENSITY_COLUMNS = ["t", "x", "value", "method", "w", "saddle_mass", "exponent", "ratio", "flag"]
BOUNDS_COLUMNS = ["t", "x", "regime", "lower_form", "upper_form", "p_bromwich", "ratio"]
GREEN_COLUMNS = ["x", "value", "inner", "outer", "t_star", "estimate_form", "ratio"]
HEAT_COLUMNS = ["t", "tau", "lower", "upper", "estimate_form", "regime", "ratio_lower",
                "ratio_upper"]

# verify tolerances
NORM_TOL = 1e-4
LAPLACE_TOL = 1e-6
GREEN_TOL = 1e-6
LAPLACE_LAMBDAS = (0.5, 1.0, 2.0, 5.0)
GREEN_LAMBDAS = (0.5, 1.0, 4.0)


def fmt(v):
    """Locale-free token: shortest round-trip repr, or inf / -inf / nan."""
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def to_csv(rows, columns):
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(fmt(r.get(c)) for c in columns) + "\n")
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy: non-finite floats become the strings inf / -inf / nan."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else fmt(obj)
    return obj


def to_json(doc):
    return json.dumps(_clean(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


def grid(value, spec, name):
    if spec is not None:
        return parse_grid(spec)
    if value is None:
        raise SystemExit(f"error: give --{name} or --{name}-grid")
    return np.array([value])


# subcommands ------------------------------------------------------------------------

def cmd_density(args):
    model = load_model(args.model)
    require(model, [WLSC_D2], "density")
    ts = grid(args.t, args.t_grid, "t")
    xs = grid(args.x, args.x_grid, "x")
    pts = [(float(t), float(x)) for t in ts for x in xs]
    res = fan_out(lambda p: density(model, p[0], p[1], args.method, args.m0), pts)
    emit(to_csv([r.row() for r in res], DENSITY_COLUMNS), args.out)
    return 0


def cmd_bounds(args):
    model = load_model(args.model)
    ts = grid(args.t, args.t_grid, "t")
    xs = grid(args.x, args.x_grid, "x")
    pts = [(float(t), float(x)) for t in ts for x in xs]

    def one(p):
        t, x = p
        band = sharp_estimate(model, t, x)
        res = density(model, t, x)
        log_form = res.saddle.log_value if band.regime == "bulk" else np.log(band.lower_form)
        return {"t": t, "x": x, "regime": band.regime, "lower_form": band.lower_form,
                "upper_form": band.upper_form, "p_bromwich": res.value,
                "ratio": float(np.exp(res.log_value - log_form))}

    emit(to_csv(fan_out(one, pts), BOUNDS_COLUMNS), args.out)
    return 0


def _attempt(fn):
    """Run an audit; hypotheses that fail turn into a skipped entry."""
    try:
        return fn()
    except (CapabilityError, OutOfRangeError, SupportError) as exc:
        return {"status": "skipped", "reason": str(exc)}


def _time_grid(model, ts):
    lim = time_limit(model)
    return [float(t) for t in ts if t < lim]


def cmd_audit(args):
    model = load_model(args.model)
    if model.degenerate:
        emit("degenerate: φ″≡0\n", args.out)
        return 0
    ts = _time_grid(model, parse_grid(args.t_grid))
    xs = parse_grid(args.x_grid)
    if model.x0 > 0:
        xs = xs[xs < 1.0 / model.x0]
    doc = {"model": model.to_dict(), "hypotheses": hypotheses(model),
           "scaling": [r.to_dict() for r in scaling_reports(model).values()],
           "inequalities": inequality_audit(model),
           "t_grid": ts, "x_grid": xs}
    doc["envelope"] = _attempt(lambda: envelope_audit(model, ts, xs))
    doc["lower_bound"] = _attempt(
        lambda: {str(t): lower_bound_constant(model, t) for t in ts})
    doc["sandwich"] = _attempt(lambda: _strip_rows(sandwich_audit(model, ts, xs)))
    emit(to_json(doc), args.out)
    return 0


def _strip_rows(doc):
    return {k: v for k, v in doc.items() if k != "rows"}


def scaling_traces(model, per_decade=16):
    lo, hi = scaling_window(model)
    x = log_grid(lo, hi, per_decade)
    rows = [{"target": "-phi''", "x": v, "value": -float(model.deriv(v, 2))} for v in x]
    rows += [{"target": "phi", "x": v, "value": float(model.phi(v)) - model.drift * v}
             for v in x]
    if model.levy is not None:
        rows += [{"target": "nu-tail", "x": v, "value": model.levy.tail(1.0 / v)} for v in x]
    return rows


def cmd_scaling_report(args):
    model = load_model(args.model)
    if model.degenerate:
        emit("degenerate: φ″≡0\n", args.out)
        return 0
    doc = {"model": model.to_dict(), "window": list(scaling_window(model)),
           "hypotheses": hypotheses(model),
           "reports": [r.to_dict() for r in scaling_reports(model).values()],
           "inequalities": inequality_audit(model)}
    emit(to_json(doc), args.out)
    if args.trace:
        atomic_write(args.trace, to_csv(scaling_traces(model), ["target", "x", "value"]))
    return 0


def cmd_green(args):
    model = load_model(args.model)
    require_green(model)
    xs = grid(args.x, args.x_grid, "x")
    res = fan_out(lambda v: green(model, float(v)).to_dict(), xs)
    emit(to_csv(res, GREEN_COLUMNS), args.out)
    return 0


def load_profile(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSpecError(exc.msg, line=exc.lineno) from None
    return profile_from_dict(doc)


def cmd_heat_kernel(args):
    model = load_model(args.model)
    profile = load_profile(args.profile)
    ts = grid(args.t, args.t_grid, "t")
    taus = grid(args.tau, args.tau_grid, "tau")
    rows = []
    for t in ts:
        # the density table behind each t is shared across tau
        rows += [heat_kernel_subordinated(model, profile, float(t), float(tau)).to_dict()
                 for tau in taus]
    emit(to_csv(rows, HEAT_COLUMNS), args.out)
    return 0


def cmd_sample(args):
    model = load_model(args.model)
    dist = sample(model, args.t, args.n, eps=args.eps, seed=args.seed)
    if args.format == "f64":
        if args.out in (None, "-"):
            raise ValueError("binary output needs --out <path>")
        atomic_write(args.out, dist.samples.astype("<f8").tobytes(), mode="wb")
    else:
        emit(to_csv([{"x": v} for v in dist.samples], ["x"]), args.out)
    summary = dist.summary()
    mean = args.t * model.dphi_at_zero()
    if np.isfinite(mean):
        summary["mean"] = float(dist.samples.mean())
        summary["variance"] = float(dist.samples.var(ddof=1)) if dist.n > 1 else float("nan")
        summary["mean_theory"] = float(mean)
    if args.ks and not model.degenerate:
        summary["ks_vs_analytic"] = dist.ks(distribution_function(model, args.t))
    text = to_json(summary)
    if args.summary:
        emit(text, args.summary)
    elif args.out not in (None, "-"):
        sys.stdout.write(text)
    else:
        sys.stderr.write(text)
    return 0


# verification suite -----------------------------------------------------------------

def _check(fn):
    try:
        return fn()
    except (CapabilityError, OutOfRangeError, SupportError) as exc:
        return {"status": "not_applicable", "reason": str(exc)}
    except NumericalIntegrityError as exc:
        return {"status": "fail", "reason": str(exc)}


def verify(model, t=1.0):
    """Run the audit suite and return a verdict document (failures are data)."""
    if model.degenerate:
        return "degenerate: φ″≡0"
    lim = time_limit(model)
    t = min(t, 0.5 * lim)
    doc = {"model": model.to_dict(), "t": t}
    if model.x0 > 0:
        doc["windows"] = {"x0": model.x0, "time_limit": lim,
                          "scaling_window": list(scaling_window(model)),
                          "x_limit": 1.0 / model.x0,
                          "note": "scaling, sandwich and Green checks restricted by x0"}
    checks = {}
    reports = scaling_reports(model)
    checks["scaling"] = {"status": "pass", "hypotheses": hypotheses(model),
                         "reports": [r.to_dict() for r in reports.values()]}
    ineq = inequality_audit(model)
    ok = all(v["pass"] for k, v in ineq.items() if isinstance(v, dict))
    checks["inequalities"] = {"status": "pass" if ok else "fail", "audit": ineq}

    def norm():
        rep = mass_audit(model, t)
        rep["tolerance"] = NORM_TOL
        rep["status"] = "pass" if abs(rep["mass"] - 1) <= NORM_TOL else "fail"
        return rep

    def positivity():
        rep = {k: v for k, v in checks["normalization"].items()
               if k in ("negative_mass", "min_density", "x_at_min")}
        if "negative_mass" not in rep:
            return {"status": "not_applicable", "reason": "normalization did not run"}
        bad = rep["negative_mass"] < -NORM_TOL * 1e-2
        rep["status"] = "fail" if bad else "pass"
        if bad:
            rep["reason"] = "p(t, .) takes negative values: the exponent is not Bernstein"
        return rep

    def laplace():
        rows = []
        for lam in LAPLACE_LAMBDAS:
            got, want = laplace_roundtrip(model, t, lam)
            rows.append({"lambda": lam, "integral": got, "target": want,
                         "rel_error": got / want - 1})
        worst = max(abs(r["rel_error"]) for r in rows)
        return {"status": "pass" if worst <= LAPLACE_TOL else "fail", "rows": rows,
                "max_rel_error": worst, "tolerance": LAPLACE_TOL}

    def sandwich():
        ts = [s for s in (0.01 * t, t, 100 * t) if s < lim]
        xs = np.logspace(-2, 2, 9)
        if model.x0 > 0:
            xs = xs[xs < 1.0 / model.x0]
        rep = _strip_rows(sandwich_audit(model, ts, xs))
        rep["status"] = "pass" if rep["passed"] else "fail"
        return rep

    def green_identity():
        require_green(model)
        if model.x0 > 0:
            return {"status": "not_applicable",
                    "reason": "the transform needs G on all of (0, inf); x0 > 0 limits x < 1/x0"}
        rep = green_transform_identity(model, GREEN_LAMBDAS)
        rep["status"] = "pass" if rep["max_rel_error"] <= GREEN_TOL else "fail"
        return rep

    checks["normalization"] = _check(norm)
    checks["positivity"] = positivity()
    checks["laplace"] = _check(laplace)
    checks["sandwich"] = _check(sandwich)
    checks["green_identity"] = _check(green_identity)
    doc["checks"] = checks
    failed = [k for k, v in checks.items() if v["status"] == "fail"]
    doc["failed"] = failed
    doc["verdict"] = "pass" if not failed else "fail"
    return doc


def cmd_verify(args):
    model = load_model(args.model)
    doc = verify(model)
    if isinstance(doc, str):
        emit(doc + "\n", args.out)
        return 0
    emit(to_json(doc), args.out)
    return 0 if doc["verdict"] == "pass" else 1


# parser -----------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="subdense",
                                 description="Transition densities of subordinators.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, model=True):
        p = sub.add_parser(name, help=help_text)
        if model:
            p.add_argument("--model", required=True, help="model JSON document")
        p.add_argument("--out", default="-", help="output path (default stdout)")
        p.set_defaults(func=fn)
        return p

    p = add("density", cmd_density, "p(t, x) on a grid, CSV")
    p.add_argument("--t", type=float)
    p.add_argument("--t-grid", help="log grid lo:hi:n")
    p.add_argument("--x", type=float)
    p.add_argument("--x-grid", help="log grid lo:hi:n")
    p.add_argument("--method", choices=["saddle", "bromwich", "both"], default="bromwich")
    p.add_argument("--m0", type=float, default=M0_DEFAULT, help="saddle mass threshold")

    p = add("bounds", cmd_bounds, "sharp two-sided forms against p, CSV")
    p.add_argument("--t", type=float)
    p.add_argument("--t-grid")
    p.add_argument("--x", type=float)
    p.add_argument("--x-grid")

    p = add("audit", cmd_audit, "hypotheses and envelope constants, JSON")
    p.add_argument("--t-grid", default="0.01:100:5")
    p.add_argument("--x-grid", default="0.01:100:9")

    p = add("scaling-report", cmd_scaling_report, "scaling audit JSON plus a trace CSV")
    p.add_argument("--trace", help="CSV path for (target, x, value) traces")

    p = add("green", cmd_green, "Green function G(x), CSV")
    p.add_argument("--x", type=float)
    p.add_argument("--x-grid")

    p = add("heat-kernel", cmd_heat_kernel, "subordinate heat kernel bounds, CSV")
    p.add_argument("--profile", required=True, help="heat profile JSON document")
    p.add_argument("--t", type=float)
    p.add_argument("--t-grid")
    p.add_argument("--tau", type=float)
    p.add_argument("--tau-grid")

    p = add("sample", cmd_sample, "Monte Carlo samples of T_t")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--eps", type=float, default=1e-6, help="small-jump cutoff")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["csv", "f64"], default="csv",
                   help="f64 writes little-endian doubles")
    p.add_argument("--summary", help="path for the JSON summary")
    p.add_argument("--ks", action="store_true", help="KS distance to the computed CDF")

    add("verify", cmd_verify, "run the verification suite, JSON verdict")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ModelSpecError, ModelInvalidError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 3
    except (CapabilityError, OutOfRangeError, SupportError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except NumericalIntegrityError as exc:
        print(f"numerical integrity: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


run = main

if __name__ == "__main__":
    sys.exit(main())
