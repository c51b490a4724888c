"""Config-driven experiments: run dynamics or schemes, evaluate claims, write artifacts.

A config is a JSON object with an ``objective`` block, exactly one of
``dynamics`` / ``scheme``, an optional ``analysis`` block listing claim
identifiers, and an optional ``output`` directory.  Every artifact is written
with sorted keys and fixed float formatting so identical configs give
byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import analysis as an
from . import lyapunov as ly
from .dynamics import DynamicsSpec, Sampling, Trajectory, energy_m, integrate
from .errors import DinavdError, InvalidArgument
from .objectives import build_objective
from .schemes import SchemeConfig, gradient_descent_run, igahd_run, oscillation_metric

DYNAMICS_CLAIMS = {
    "sharp_rate": "pointwise tail slope <= -2 alpha gamma/(gamma+2) + 0.3",
    "sharp_bound": "closed-form sharp bound dominates F - F* for t >= t1",
    "critical_bound": "critical-alpha bound dominates F - F* for t >= t0 + beta",
    "gradient_integrable": "int t^(2 alpha gamma/(gamma+2)) |grad F|^2 converges",
    "improved_rate": "envelope slope <= -(alpha - eps) + 0.3 and int t^(alpha-eps)(F - F*) converges",
    "averaged_rate": "averaged point and windowed inf slopes <= -(alpha + 1 - eps) + 0.3, liminf proxy shrinks",
    "flat_rate": "envelope slope <= -2 gamma1/(gamma1-2) + 0.3, gradient integral converges, v bounded",
    "flat_inf_rate": "windowed inf slope <= -(3 gamma1 - 2) gamma2/(2 (gamma1-2)(gamma2-1)) + 0.3",
    "flat_certificates": "flat-case G and F are non-increasing past t1",
    "energy_monotone": "E_m is non-increasing",
    "sharp_certificates": "sharp-case H and G are non-increasing past t0 + beta(alpha - lambda)",
    "jensen": "F(z) is below the weighted average of F on the averaging window",
}
SCHEME_CLAIMS = {
    "igahd_rate": "tail slope of F(x_k) - F* over k in [100, K] <= -1.8",
    "gradient_summable": "partial sums of k^2 |grad F(x_k)|^2 gain at most 5% over the last decade",
    "oscillation_damping": "local maximum count over k in [100, K] is non-increasing in beta",
}
ENERGY_SLACK = 1e-8
CERT_SLACK = 1e-6


@dataclass
class Outcome:
    exit_code: int
    report: dict
    files: list


# ----------------------------------------------------------------- parsing

def _get(block, key, path, kind=float, default=None, required=True):
    if key not in block:
        if required and default is None:
            raise InvalidArgument(f"{path}.{key}: missing")
        return default
    v = block[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise InvalidArgument(f"{path}.{key}: must be a finite number, got {v!r}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise InvalidArgument(f"{path}.{key}: must be an integer, got {v!r}")
        return v
    if not isinstance(v, kind):
        raise InvalidArgument(f"{path}.{key}: has the wrong type ({type(v).__name__})")
    return v


def _positive(v, where):
    if not v > 0:
        raise InvalidArgument(f"{where}: must be positive, got {v}")
    return v


def _x0(spec, dim, path):
    """Literal list, ``{"seed": s}`` (standard normal) or ``{"value": c}``."""
    if isinstance(spec, list):
        x = np.asarray(spec, dtype=float)
        if x.shape != (dim,):
            raise InvalidArgument(f"{path}: expected {dim} entries, got {x.size}")
        return x
    if isinstance(spec, dict) and "seed" in spec:
        return np.random.default_rng(_get(spec, "seed", path, int)).standard_normal(dim)
    if isinstance(spec, dict) and "value" in spec:
        return np.full(dim, _get(spec, "value", path))
    raise InvalidArgument(f"{path}: must be a list, {{'seed': s}} or {{'value': c}}")


def _sampling(block, path):
    if block is None:
        return Sampling()
    if "log_spaced" in block:
        return Sampling.log_spaced(_get(block, "log_spaced", path, int))
    if "uniform" in block:
        return Sampling.uniform(_positive(_get(block, "uniform", path), f"{path}.uniform"))
    raise InvalidArgument(f"{path}: expected 'log_spaced' or 'uniform'")


def _claims(block, known, path):
    claims = block.get("claims", [])
    if not isinstance(claims, list):
        raise InvalidArgument(f"{path}.claims: must be a list")
    for c in claims:
        if c not in known:
            raise InvalidArgument(f"{path}.claims: unknown claim {c!r}; known: {sorted(known)}")
    return claims


def _epsilons(block, path):
    eps = block.get("epsilon", 0.1)
    eps = eps if isinstance(eps, list) else [eps]
    out = []
    for i, e in enumerate(eps):
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 < e < 1:
            raise InvalidArgument(f"{path}.epsilon[{i}]: must lie in (0, 1), got {e!r}")
        out.append(float(e))
    return out


def parse_config(cfg, base_dir=None):
    """Validate ``cfg`` and return the pieces needed by ``run``."""
    if not isinstance(cfg, dict):
        raise InvalidArgument("config: must be a JSON object")
    if "objective" not in cfg:
        raise InvalidArgument("objective: missing")
    has_dyn, has_sch = "dynamics" in cfg, "scheme" in cfg
    if has_dyn == has_sch:
        raise InvalidArgument("config: exactly one of 'dynamics' and 'scheme' is required")
    obj = build_objective(cfg["objective"], base_dir=base_dir)
    ana = cfg.get("analysis", {})
    if not isinstance(ana, dict):
        raise InvalidArgument("analysis: must be an object")
    parsed = {"objective": obj, "analysis": ana, "name": cfg.get("name", "experiment")}
    if has_dyn:
        d = cfg["dynamics"]
        p = "dynamics"
        alpha = _positive(_get(d, "alpha", p), f"{p}.alpha")
        beta = _get(d, "beta", p, default=0.0, required=False)
        if beta < 0:
            raise InvalidArgument(f"{p}.beta: must be non-negative, got {beta}")
        t0 = _positive(_get(d, "t0", p, default=1.0, required=False), f"{p}.t0")
        t_end = _get(d, "t_end", p)
        if not t_end > t0:
            raise InvalidArgument(f"{p}.t_end: must exceed t0, got {t_end}")
        variant = d.get("variant", "DIN_AVD")
        if variant not in ("DIN_AVD", "AVD", "DIN_AVD_MODIFIED"):
            raise InvalidArgument(f"{p}.variant: unknown variant {variant!r}")
        parsed["spec"] = DynamicsSpec(
            variant, alpha, beta, t0, _x0(d.get("x0", {"value": 1.0}), obj.dim, f"{p}.x0"), t_end,
            sampling=_sampling(d.get("sampling"), f"{p}.sampling"),
            rtol=_positive(_get(d, "rtol", p, default=1e-9, required=False), f"{p}.rtol"),
            atol=_get(d, "atol", p, default=1e-12, required=False))
        parsed["backend"] = d.get("backend", "auto")
        parsed["claims"] = _claims(ana, DYNAMICS_CLAIMS, "analysis")
    else:
        s = cfg["scheme"]
        p = "scheme"
        name = s.get("name", "igahd")
        if name not in ("igahd", "gradient_descent"):
            raise InvalidArgument(f"{p}.name: must be 'igahd' or 'gradient_descent', got {name!r}")
        L = obj.lipschitz_grad
        units = s.get("units", "absolute")
        if units not in ("absolute", "lipschitz"):
            raise InvalidArgument(f"{p}.units: must be 'absolute' or 'lipschitz', got {units!r}")
        if units == "lipschitz" and L is None:
            raise InvalidArgument(f"{p}.units: objective has no global Lipschitz constant")
        # in 'lipschitz' units s is given in 1/L and beta in 1/sqrt(L)
        s_scale, b_scale = (1 / L, 1 / math.sqrt(L)) if units == "lipschitz" else (1.0, 1.0)
        step = _positive(_get(s, "s", p), f"{p}.s")
        if "beta_list" in s:
            betas = s["beta_list"]
            if not isinstance(betas, list) or not betas:
                raise InvalidArgument(f"{p}.beta_list: must be a non-empty list")
            for i, b in enumerate(betas):
                if isinstance(b, bool) or not isinstance(b, (int, float)) or b < 0:
                    raise InvalidArgument(f"{p}.beta_list[{i}]: must be a non-negative number")
        else:
            b = s.get("beta", "sqrt_s")
            if b == "sqrt_s":
                betas = [math.sqrt(step * s_scale) / b_scale]
            else:
                b = _get(s, "beta", p)
                if b < 0:
                    raise InvalidArgument(f"{p}.beta: must be non-negative, got {b}")
                betas = [b]
        parsed.update(
            scheme=name,
            alpha=_positive(_get(s, "alpha", p, default=3.0, required=False), f"{p}.alpha"),
            s=step * s_scale, s_units=step, betas=[float(b) for b in betas], beta_scale=b_scale,
            units=units, max_iter=_get(s, "max_iter", p, int),
            x0=_x0(s.get("x0", {"value": 1.0}), obj.dim, f"{p}.x0"),
            backend=s.get("backend", "auto"),
            divergence_scan=bool(s.get("divergence_scan", False)),
            claims=_claims(ana, SCHEME_CLAIMS, "analysis"))
        if parsed["max_iter"] < 1:
            raise InvalidArgument(f"{p}.max_iter: must be positive")
    _epsilons(ana, "analysis")
    return parsed


# ----------------------------------------------------------------- claims

def _sharp(ana, obj, spec):
    gamma = float(ana.get("gamma", 2.0))
    if obj.mu is None:
        raise InvalidArgument("analysis: sharp claims need an objective with a growth constant mu")
    return ly.sharp_constants(gamma, spec.alpha, spec.beta, obj.mu)


def _flat(ana, obj, spec):
    g1 = float(ana.get("gamma1", obj.gamma_flat or 0))
    g2 = float(ana.get("gamma2", obj.gamma_growth or 0))
    mu = float(ana.get("mu", obj.mu or 0))
    return ly.flat_constants(g1, g2, spec.alpha, spec.beta, mu, spec.t0)


def _z_series(tr, obj, delta, t_lo):
    ts = tr.t[(tr.t >= t_lo) & (tr.t / 2 >= tr.t[0])]
    return ts, np.array([an.averaged_point(tr, t, delta, obj)[1] for t in ts])


def _dynamics_claims(tr, obj, parsed):
    spec, ana = tr.spec, parsed["analysis"]
    out, consts = [], {}
    t_end = spec.t_end
    decades = float(ana.get("fit_decades", 1.0))
    em0 = ly.energy_m_initial(obj, spec.x0, spec.t0, spec.alpha, spec.beta)
    for name in parsed["claims"]:
        if name == "sharp_rate":
            c = consts.setdefault("sharp", _sharp(ana, obj, spec))
            fit = an.tail_rate(tr.t, tr.f_gap, decades, an.POINTWISE)
            thr = -c.rate + 0.3
            out.append(an.claim(name, fit.exponent, thr, fit.exponent <= thr, fit=fit.to_dict()))
        elif name == "sharp_bound":
            c = consts.setdefault("sharp", _sharp(ana, obj, spec))
            m = tr.t >= c.t1
            b = ly.bound_sharp_general(tr.t[m], c, em0, spec.t0)
            bs = ly.bound_sharp_general(tr.t[m], c, em0, spec.t0, strict=True)
            margin = float(np.min(b - tr.f_gap[m])) if m.any() else float("inf")
            out.append(an.claim(name, margin, -1e-9, margin >= -1e-9, samples=int(m.sum()),
                                K=ly.closed_form_K(c, em0, spec.t0),
                                K_strict=ly.closed_form_K(c, em0, spec.t0, strict=True),
                                strict_margin=float(np.min(bs - tr.f_gap[m])) if m.any() else None))
        elif name == "critical_bound":
            c = consts.setdefault("sharp", _sharp(ana, obj, spec))
            m = tr.t >= (spec.t0 + spec.beta) * (1 - 1e-12)
            b = ly.bound_sharp_critical(np.maximum(tr.t[m], spec.t0 + spec.beta), c, em0, spec.t0)
            margin = float(np.min(b - tr.f_gap[m]))
            out.append(an.claim(name, margin, 0.0, margin >= 0, samples=int(m.sum())))
        elif name == "gradient_integrable":
            c = consts.setdefault("sharp", _sharp(ana, obj, spec))
            d = an.cumulative_weighted_integral(tr.t, tr.grad_norm ** 2, c.rate)
            beyond = an.cumulative_weighted_integral(tr.t, tr.grad_norm ** 2, c.rate + 2)
            out.append(an.claim(name, d.tail_fraction, 0.05, d.converged, delta=c.rate,
                                beyond_delta=beyond.to_dict()))
        elif name in ("improved_rate", "averaged_rate"):
            for eps in _epsilons(ana, "analysis"):
                out.extend(_sharp2_claims(name, tr, obj, eps, decades))
        elif name in ("flat_rate", "flat_inf_rate", "flat_certificates"):
            fc = consts.setdefault("flat", _flat(ana, obj, spec))
            out.append(_flat_claim(name, tr, obj, fc, float(ana.get("fit_decades", 2.0))))
        elif name == "energy_monotone":
            em = energy_m(tr, obj)
            ok, worst = an.non_increasing(em, ENERGY_SLACK * em0)
            out.append(an.claim(name, worst, ENERGY_SLACK * em0, ok, E_m_t0=em0))
        elif name == "sharp_certificates":
            c = consts.setdefault("sharp", _sharp(ana, obj, spec))
            _, H, G = ly.sharp_certificates(tr, obj, c)
            okh, wh = an.non_increasing(H, CERT_SLACK * abs(H[0]))
            okg, wg = an.non_increasing(G, CERT_SLACK * abs(G[0]))
            out.append(an.claim(name, max(wh / abs(H[0]), wg / abs(G[0])), CERT_SLACK, okh and okg,
                                H_worst=wh, G_worst=wg))
        elif name == "jensen":
            delta = float(ana.get("jensen_delta", spec.alpha))
            worst = -float("inf")
            for t in np.geomspace(max(2 * spec.t0, t_end / 100), t_end, 5):
                _, X, w = an.averaging_nodes(tr, t, delta)
                z = w @ X
                avg = float(w @ np.array([obj.f_gap(x) for x in X]))
                worst = max(worst, obj.f_gap(z) - avg - 1e-12 * abs(avg))
            out.append(an.claim(name, worst, 0.0, worst <= 0))
    return out, consts


def _sharp2_claims(name, tr, obj, eps, decades):
    spec = tr.spec
    a = spec.alpha
    out = []
    if name == "improved_rate":
        fit = an.tail_rate(tr.t, tr.f_gap, decades, an.WINDOWED_MAX)
        thr = -(a - eps) + 0.3
        integ = an.cumulative_weighted_integral(tr.t, tr.f_gap, a - eps)
        out.append(an.claim(f"{name}[eps={eps:g}]", fit.exponent, thr,
                            fit.exponent <= thr and integ.converged,
                            fit=fit.to_dict(), integral=integ.to_dict()))
    else:
        thr = -(a + 1 - eps) + 0.3
        lo = spec.t_end / 10 ** decades
        tz, fz = _z_series(tr, obj, a - eps, lo)
        zfit = an.tail_rate(tz, fz, decades, an.POINTWISE)
        ti, fi = an.windowed_inf_series(tr.t, tr.f_gap)
        ifit = an.tail_rate(ti, fi, decades, an.POINTWISE)
        m = tr.t <= spec.t_end / 10 * (1 + 1e-12)
        l_short = an.check_liminf_scaling(tr.t[m], tr.f_gap[m], a - eps)
        l_full = an.check_liminf_scaling(tr.t, tr.f_gap, a - eps)
        ok = zfit.exponent <= thr and ifit.exponent <= thr and l_full < l_short
        out.append(an.claim(f"{name}[eps={eps:g}]", max(zfit.exponent, ifit.exponent), thr, ok,
                            averaged_fit=zfit.to_dict(), inf_fit=ifit.to_dict(),
                            liminf_short=l_short, liminf_full=l_full))
    return out


def _flat_claim(name, tr, obj, fc, decades):
    if name == "flat_rate":
        fit = an.tail_rate(tr.t, tr.f_gap, decades, an.WINDOWED_MAX)
        thr = -fc.rate + 0.3
        integ = an.cumulative_weighted_integral(tr.t, tr.grad_norm ** 2, fc.rate)
        cert = ly.flat_certificates(tr, obj, fc)
        vb = an.v_bounded(cert["t"], cert["v"], tr.spec.t_end)
        return an.claim(name, fit.exponent, thr, fit.exponent <= thr and integ.converged and vb,
                        fit=fit.to_dict(), integral=integ.to_dict(), v_bounded=vb,
                        v_max=float(cert["v"].max()))
    if name == "flat_inf_rate":
        g1, g2 = fc.gamma1, fc.gamma2
        thr = -(3 * g1 - 2) * g2 / (2 * (g1 - 2) * (g2 - 1)) + 0.3
        ti, fi = an.windowed_inf_series(tr.t, tr.f_gap)
        fit = an.tail_rate(ti, fi, decades, an.POINTWISE)
        return an.claim(name, fit.exponent, thr, fit.exponent <= thr, fit=fit.to_dict())
    cert = ly.flat_certificates(tr, obj, fc)
    G = cert["G"]
    ok, worst = an.non_increasing(G, CERT_SLACK * abs(G[0]))
    okf, worstf = an.non_increasing(cert["F"], CERT_SLACK * abs(cert["F"][0]))
    value = max(worst / abs(G[0]), worstf / abs(cert["F"][0]))
    return an.claim(name, value, CERT_SLACK, ok and okf, G_worst=worst, F_worst=worstf)


def _scheme_claims(logs, parsed):
    out = []
    K = parsed["max_iter"]
    main = logs[0]
    for name in parsed["claims"]:
        if main.diverged and name != "oscillation_damping":
            out.append(an.claim(name, None, None, False, diverged=True, iterations=len(main)))
        elif name == "igahd_rate":
            m = main.k >= 100
            fit = an.tail_rate(main.k[m].astype(float), main.f_gap[m], math.log10(K / 100))
            ok = fit.exponent <= -1.8 and not main.diverged
            out.append(an.claim(name, fit.exponent, -1.8, ok, fit=fit.to_dict()))
        elif name == "gradient_summable":
            d = an.cumulative_weighted_sum(main.k.astype(float), main.grad_norm ** 2, 2.0)
            half = an.cumulative_weighted_sum(main.k.astype(float), main.grad_norm ** 2, 2.0,
                                              tail_factor=2.0)
            out.append(an.claim(name, d.tail_fraction, 0.05, d.converged and not main.diverged,
                                tail_fraction_factor2=half.tail_fraction))
        elif name == "oscillation_damping":
            counts = []
            for lg in logs:
                counts.append(None if lg.diverged or len(lg) <= 111
                              else oscillation_metric(lg, 100, K)[0])
            ok = None not in counts and all(a >= b for a, b in zip(counts, counts[1:]))
            out.append(an.claim(name, counts, "non-increasing", ok,
                                betas=[lg.params["beta"] for lg in logs]))
    return out


# ----------------------------------------------------------------- running

def _dump(path, doc):
    with open(path, "w") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _divergence_threshold(obj, parsed, cap=1e5, bisections=8):
    """Bracket of the smallest beta (config units) that diverges within ``max_iter`` steps."""
    probe_iter = parsed["max_iter"]
    scale, s, alpha, x0 = parsed["beta_scale"], parsed["s"], parsed["alpha"], parsed["x0"]

    def diverges(b):
        cfg = SchemeConfig(alpha, b * scale, s, probe_iter, x0)
        return igahd_run(cfg, obj, parsed["backend"]).diverged

    lo = max(parsed["betas"]) or 1.0
    if diverges(lo):
        lo_ok = [b for b in sorted(parsed["betas"]) if not diverges(b)]
        hi, lo = lo, (max(lo_ok) if lo_ok else 0.0)
    else:
        hi = lo * 2
        while not diverges(hi):
            lo, hi = hi, hi * 2
            if hi > cap:
                return {"found": False, "searched_up_to": lo, "probe_iter": probe_iter}
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if diverges(mid) else (mid, hi)
    return {"found": True, "bracket": [lo, hi], "probe_iter": probe_iter}


def run(cfg, out_dir=None, base_dir=None):
    """Execute a parsed-or-raw config; returns an ``Outcome``.

    Exit codes: 0 all claims pass, 1 some claim failed, 3 the run diverged or
    the integrator failed.  Invalid configs raise ``InvalidArgument``.
    """
    parsed = parse_config(cfg, base_dir)
    out_dir = out_dir or cfg.get("output") or "."
    os.makedirs(out_dir, exist_ok=True)
    obj = parsed["objective"]
    files = []
    if "spec" in parsed:
        tr = integrate(parsed["spec"], obj, backend=parsed["backend"])
        path = os.path.join(out_dir, "trajectory.csv")
        tr.to_csv(path)
        files.append(path)
        claims, consts = _dynamics_claims(tr, obj, parsed)
        if not consts and obj.mu is not None and obj.gamma_flat == 2.0:
            consts["sharp"] = _sharp(parsed["analysis"], obj, parsed["spec"])
        meta = {"kind": "dynamics", "variant": tr.spec.variant.value, "alpha": tr.spec.alpha,
                "beta": tr.spec.beta, "samples": len(tr), "steps": tr.stats.get("nsteps"),
                "f_gap_end": float(tr.f_gap[-1])}
        diverged = False
    else:
        logs = []
        manifest = []
        for i, b in enumerate(parsed["betas"]):
            sc = SchemeConfig(parsed["alpha"], b * parsed["beta_scale"], parsed["s"],
                              parsed["max_iter"], parsed["x0"])
            if parsed["scheme"] == "igahd":
                lg = igahd_run(sc, obj, backend=parsed["backend"])
            else:
                lg = gradient_descent_run(sc.s, sc.max_iter, sc.x0, obj)
            logs.append(lg)
            fname = f"{parsed['scheme']}_{i:02d}_beta_{b:g}.csv"
            lg.to_csv(os.path.join(out_dir, fname))
            files.append(os.path.join(out_dir, fname))
            manifest.append({"file": fname, "beta": b, "beta_absolute": sc.beta, "s": sc.s,
                             "alpha": sc.alpha, "iterations": len(lg), "diverged": lg.diverged,
                             "guarantee": lg.guarantee,
                             "f_gap_end": float(lg.f_gap[-1]) if len(lg) else None})
        claims = _scheme_claims(logs, parsed)
        consts = {}
        meta = {"kind": "scheme", "scheme": parsed["scheme"], "units": parsed["units"],
                "lipschitz": obj.lipschitz_grad, "mu": obj.mu}
        if len(parsed["betas"]) > 1 or parsed["divergence_scan"]:
            doc = {"units": parsed["units"], "entries": manifest}
            if parsed["divergence_scan"]:
                doc["divergence"] = _divergence_threshold(obj, parsed)
            path = os.path.join(out_dir, "manifest.json")
            _dump(path, doc)
            files.append(path)
        diverged = any(lg.diverged for lg in logs) and len(logs) == 1
    if consts:
        path = os.path.join(out_dir, "constants.json")
        with open(path, "w") as fh:
            fh.write(ly.constants_json(*consts.values()) + "\n")
        files.append(path)
    path = os.path.join(out_dir, "analysis.json")
    with open(path, "w") as fh:
        fh.write(an.report_json(claims, name=parsed["name"], objective=obj.name, **meta) + "\n")
    files.append(path)
    passed = all(c["passed"] for c in claims)
    code = 3 if diverged else (0 if passed else 1)
    return Outcome(code, json.loads(an.report_json(claims, name=parsed["name"])), files)


def error_document(exc):
    kind = type(exc).__name__ if isinstance(exc, DinavdError) else "Error"
    return {"error": kind, "message": str(exc)}
