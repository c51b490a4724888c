"""Rate fits, integrability diagnostics and the scalar inequality lemmas.

Series are passed as parallel arrays ``(t, f)``; ``t`` must be strictly
increasing.  All fits are ordinary least squares in log-log coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument

MIN_FIT_SAMPLES = 20
HALF_DECADE = math.sqrt(10.0)
POINTWISE, WINDOWED_MAX = "pointwise", "windowed_max"


def _series(t, f, name="f"):
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.ndim != 1 or t.shape != f.shape:
        raise InvalidArgument(f"t and {name} must be 1-D arrays of equal length")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise InvalidArgument("t must be strictly increasing")
    return t, f


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    window: tuple
    residual_rms: float
    mode: str
    samples: int
    resolved: bool = True

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        if not math.isfinite(self.exponent):
            d["exponent"] = None if math.isnan(self.exponent) else "-inf"
        return d


def running_max(t, f, width=HALF_DECADE):
    """``max f`` over the trailing window ``[t/width, t]`` at every sample."""
    t, f = _series(t, f)
    lo = np.searchsorted(t, t / width * (1 - 1e-12), side="left")
    return np.array([f[lo[i]:i + 1].max() for i in range(t.size)])


def windowed_inf_series(t, f):
    """``min f`` over ``[t/2, t]`` at every sample whose window is fully covered."""
    t, f = _series(t, f)
    keep = t / 2 >= t[0] * (1 - 1e-12)
    lo = np.searchsorted(t, t / 2 * (1 - 1e-12), side="left")
    vals = np.array([f[lo[i]:i + 1].min() for i in np.where(keep)[0]])
    return t[keep], vals


def windowed_inf(t, f, at):
    """Minimum of ``f`` over the samples in ``[at/2, at]``."""
    t, f = _series(t, f)
    m = (t >= at / 2 * (1 - 1e-12)) & (t <= at * (1 + 1e-12))
    if not np.any(m):
        raise InvalidArgument(f"no samples in [{at / 2}, {at}]")
    return float(f[m].min())


def fit_rate(t, f, window=None, mode=POINTWISE):
    """Slope of ``log f`` against ``log t`` over ``window = (t_lo, t_hi)``.

    ``windowed_max`` first replaces ``f`` by its running maximum over the
    trailing half decade and only keeps samples whose window is complete, so
    a pure power law keeps its exact exponent.
    """
    t, f = _series(t, f)
    if mode not in (POINTWISE, WINDOWED_MAX):
        raise InvalidArgument(f"mode must be {POINTWISE!r} or {WINDOWED_MAX!r}, got {mode!r}")
    lo, hi = (t[0], t[-1]) if window is None else map(float, window)
    if not lo < hi:
        raise InvalidArgument(f"window must satisfy t_lo < t_hi, got {(lo, hi)}")
    m = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if np.any(f[m] <= 0) or not np.all(np.isfinite(f[m])):
        raise InvalidArgument("fit_rate needs positive finite values in the window")
    if mode == WINDOWED_MAX:
        f = running_max(t, f)
        m &= t >= t[0] * HALF_DECADE * (1 - 1e-12)
    n = int(m.sum())
    if n < MIN_FIT_SAMPLES:
        raise InvalidArgument(f"window holds {n} usable samples, need {MIN_FIT_SAMPLES}")
    X, Y = np.log(t[m]), np.log(f[m])
    A = np.column_stack((X, np.ones_like(X)))
    (slope, icpt), *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = Y - A @ np.array([slope, icpt])
    return RateFit(float(slope), float(icpt), (float(t[m][0]), float(t[m][-1])),
                   float(np.sqrt(np.mean(res ** 2))), mode, n)


def tail_rate(t, f, decades=1.0, mode=POINTWISE, floor=0.0):
    """Rate over the last ``decades`` of the series, shrunk to its resolvable part.

    The window is cut at the first sample with ``f <= floor`` (underflow or
    the integrator's noise floor).  If fewer than 20 samples survive because
    ``f`` dropped below ``floor``, the decay is faster than anything the
    window can resolve and the exponent is reported as ``-inf`` with
    ``resolved = False``.
    """
    t, f = _series(t, f)
    lo = t[-1] / 10 ** decades
    bad = np.where((t >= lo * (1 - 1e-12)) & ~(f > floor))[0]
    if not bad.size:
        return fit_rate(t, f, (lo, t[-1]), mode)
    t, f = t[:bad[0]], f[:bad[0]]
    try:
        return fit_rate(t, f, (lo, t[-1]), mode)
    except InvalidArgument:
        return RateFit(float("-inf"), float("nan"), (float(lo), float(lo)), 0.0, mode,
                       int(np.sum(t >= lo)), resolved=False)


@dataclass(frozen=True, eq=False)
class IntegralDiagnostic:
    delta: float
    t: np.ndarray
    cumulative: np.ndarray
    converged: bool
    tail_fraction: float
    tail_factor: float = 2.0

    @property
    def total(self):
        return float(self.cumulative[-1])

    def to_dict(self):
        return {"delta": self.delta, "total": self.total, "converged": self.converged,
                "tail_fraction": self.tail_fraction, "tail_factor": self.tail_factor}


def _tail(t, cum, factor, threshold):
    total = float(cum[-1])
    if total == 0:
        return True, 0.0
    prior = float(np.interp(t[-1] / factor, t, cum))
    frac = (total - prior) / total
    return frac <= threshold, frac


def cumulative_weighted_integral(t, g, delta, tail_factor=2.0, threshold=0.05):
    """Trapezoid partial integrals of ``t^delta g(t)``.

    ``tail_fraction`` is the share of the total collected over the last
    factor-``tail_factor`` span ``[T/tail_factor, T]``; the integral counts as
    converged when it is at most ``threshold``.
    """
    t, g = _series(t, g, "g")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise InvalidArgument("g must be finite and non-negative")
    h = t ** float(delta) * g
    cum = np.zeros_like(t)
    cum[1:] = np.cumsum(0.5 * (h[1:] + h[:-1]) * np.diff(t))
    ok, frac = _tail(t, cum, tail_factor, threshold)
    return IntegralDiagnostic(float(delta), t, cum, ok, frac, tail_factor)


def cumulative_weighted_sum(k, g, delta, tail_factor=10.0, threshold=0.05):
    """Partial sums of ``k^delta g_k`` with the same tail verdict."""
    k, g = _series(k, g, "g")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise InvalidArgument("g must be finite and non-negative")
    cum = np.cumsum(k ** float(delta) * g)
    ok, frac = _tail(k, cum, tail_factor, threshold)
    return IntegralDiagnostic(float(delta), k, cum, ok, frac, tail_factor)


def averaging_nodes(traj, t, delta):
    """Quadrature nodes, points and normalized weights of the average on ``[t/2, t]``.

    Interior samples are used as they are; the end points are linearly
    interpolated.  Weights are ``u^delta`` times trapezoid weights.
    """
    ts = traj.t
    a = t / 2
    if a < ts[0] * (1 - 1e-12) or t > ts[-1] * (1 + 1e-12):
        raise InvalidArgument(f"trajectory does not cover [{a}, {t}]")
    inner = np.where((ts > a) & (ts < t))[0]
    if inner.size + 2 < MIN_FIT_SAMPLES:
        raise InvalidArgument(f"[{a}, {t}] holds {inner.size} samples, need {MIN_FIT_SAMPLES}")

    def at(s):
        j = int(np.clip(np.searchsorted(ts, s), 1, ts.size - 1))
        w = (s - ts[j - 1]) / (ts[j] - ts[j - 1])
        return (1 - w) * traj.x[j - 1] + w * traj.x[j]

    u = np.concatenate(([a], ts[inner], [t]))
    X = np.vstack((at(a), traj.x[inner], at(t)))
    du = np.diff(u)
    w = np.zeros_like(u)
    w[:-1] += du / 2
    w[1:] += du / 2
    w *= u ** float(delta)
    return u, X, w / w.sum()


def averaged_point(traj, t, delta, obj):
    """Weighted time average ``z`` of ``x`` over ``[t/2, t]`` and ``F(z) - F*``."""
    _, X, w = averaging_nodes(traj, t, delta)
    z = w @ X
    return z, obj.f_gap(z)


def check_liminf_scaling(t, f, delta):
    """``min`` over the last decade of ``t^(delta+1) log(t) f(t)``."""
    t, f = _series(t, f)
    if t[0] <= 0 or t[-1] / t[0] < 100 * (1 - 1e-12):
        raise InvalidArgument("series must span at least two decades")
    m = t >= t[-1] / 10 * (1 - 1e-12)
    return float(np.min(t[m] ** (delta + 1) * np.log(t[m]) * f[m]))


def non_increasing(values, slack):
    """``(ok, worst)`` where ``worst`` is the largest step-to-step increase."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return True, 0.0
    worst = float(np.max(np.diff(v)))
    return worst <= slack, worst


def v_bounded(t, v, t_end):
    """Boundedness proxy: max reached in the first half, or the late max within 1%."""
    t, v = _series(t, v, "v")
    early = t < t_end / 2
    if not np.any(early):
        return False
    peak_early = float(v[early].max())
    late = v[~early]
    return bool(late.size == 0 or late.max() <= 1.01 * peak_early)


# ------------------------------------------------------------------ lemmas

class LemmaReport(NamedTuple):
    trials: int
    violations: dict
    counterexample: dict | None

    @property
    def passed(self):
        return not any(self.violations.values())

    def to_dict(self):
        return {"trials": self.trials, "violations": self.violations,
                "counterexample": self.counterexample, "passed": self.passed}


def _leq(lhs, rhs, rel=1e-12):
    return lhs <= rhs + rel * (abs(lhs) + abs(rhs)) + 1e-300


def cauchy_split_ok(u, v, a):
    """``|<u,v>| <= a/2 |u|^2 + |v|^2/(2a)``."""
    return _leq(abs(float(u @ v)), 0.5 * a * float(u @ u) + float(v @ v) / (2 * a))


def norm_split_ok(u, v, a):
    """``|u|^2 <= (1+a)|u+v|^2 + (1+1/a)|v|^2``."""
    w = u + v
    return _leq(float(u @ u), (1 + a) * float(w @ w) + (1 + 1 / a) * float(v @ v))


def control_v_ok(x, delta, k1, k2):
    """``x^delta (x^(1-delta) - K1) <= K2`` implies ``x <= (K2^(1-delta) + K1)^(1/(1-delta))``."""
    if not x ** delta * (x ** (1 - delta) - k1) <= k2:
        return True
    return _leq(x, (k2 ** (1 - delta) + k1) ** (1 / (1 - delta)), 1e-10)


def min_g_bound(delta, k):
    return k * (delta - 1) * (delta * k) ** (delta / (1 - delta))


def min_g_ok(x, delta, k):
    """``x - K x^delta >= K (delta-1) (delta K)^(delta/(1-delta))`` for ``x >= 0``."""
    return _leq(min_g_bound(delta, k), x - k * x ** delta, 1e-10)


def check_inequality_lemmas(seed, trials):
    """Randomized check of the four scalar/vector inequalities.

    Draws ``u, v`` in dimension 1..8 with magnitudes spread over six decades,
    ``a``, ``K``, ``K1``, ``K2`` log-uniform in ``[1e-2, 1e2]`` and
    ``delta`` in ``[0.05, 0.95]``.  Half of the ``x`` draws sit near the
    threshold of the implication so its premise is exercised.
    """
    if int(trials) != trials or trials < 1000:
        raise InvalidArgument(f"trials must be an integer >= 1000, got {trials!r}")
    rng = np.random.default_rng(seed)
    names = ("cauchy_split", "norm_split", "control_v", "min_g")
    viol = {n: 0 for n in names}
    first = None
    for i in range(int(trials)):
        n = int(rng.integers(1, 9))
        u = rng.standard_normal(n) * 10 ** rng.uniform(-3, 3)
        v = rng.standard_normal(n) * 10 ** rng.uniform(-3, 3)
        if rng.random() < 0.1:
            v = u.copy()
        a = 10 ** rng.uniform(-2, 2)
        delta = rng.uniform(0.05, 0.95)
        k, k1, k2 = 10 ** rng.uniform(-2, 2, size=3)
        xmax = (k2 ** (1 - delta) + k1) ** (1 / (1 - delta))
        x_ctrl = xmax * rng.uniform(0, 1.5) if rng.random() < 0.5 else 10 ** rng.uniform(-3, 3)
        x_min = (delta * k) ** (1 / (1 - delta)) * rng.uniform(0, 3)
        checks = {
            "cauchy_split": cauchy_split_ok(u, v, a),
            "norm_split": norm_split_ok(u, v, a),
            "control_v": control_v_ok(x_ctrl, delta, k1, k2),
            "min_g": min_g_ok(x_min, delta, k),
        }
        for name, ok in checks.items():
            if not ok:
                viol[name] += 1
                if first is None:
                    first = {"trial": i, "lemma": name, "a": a, "delta": delta, "K": k,
                             "K1": k1, "K2": k2, "x_control": x_ctrl, "x_min": x_min,
                             "u": u.tolist(), "v": v.tolist()}
    return LemmaReport(int(trials), viol, first)


# ------------------------------------------------------------------ reports

def claim(name, value, threshold, passed, **extra):
    """One entry of an analysis report."""
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, np.generic):
            x = x.item()
        if isinstance(x, float) and not math.isfinite(x):
            return None if math.isnan(x) else ("-inf" if x < 0 else "inf")
        return x
    return {"claim": name, "value": clean(value), "threshold": clean(threshold),
            "passed": bool(passed), **{k: clean(v) for k, v in extra.items()}}


def report_json(claims, **meta):
    doc = {**meta, "claims": claims, "all_passed": all(c["passed"] for c in claims)}
    return json.dumps(doc, indent=2, sort_keys=True)
