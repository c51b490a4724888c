"""Closed-form constants, Lyapunov energies and explicit decay bounds.

Sharp geometry (quadratic growth, ``gamma`` from the flatness condition):

    lambda = 2 alpha / (gamma + 2)
    E(t)   = (t^2 + t beta (lambda - alpha)) (F - F*) + 1/2 |lambda (x - x*) + t y|^2
    H(t)   = E(t) u^(gamma lambda - 2) exp(-Phi(u)),   u = t + beta (lambda - alpha)

with ``y = x' + beta grad F(x)`` the integrator's auxiliary velocity, so no
trajectory is ever differentiated.  Flat geometry (``gamma1 >= gamma2 > 2``)
uses ``p = 4/(gamma1-2)``, ``lambda = 2/(gamma1-2)`` and the extra term
``xi/2 |x - x*|^2`` in ``E``, with ``H = t^p E``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BoundNotApplicable, DomainError, InvalidArgument

SQRT2 = math.sqrt(2.0)
CRITICAL_TOL = 1e-12
MAX_EXP = 700.0  # exp overflows just above 709


def r_poly(r, c0):
    return r ** 3 - (1 + c0) * r ** 2 - 2 * (1 + SQRT2) * r - 4


def solve_r_star(c0):
    """Unique positive root of ``r^3 - (1+c0) r^2 - 2(1+sqrt 2) r - 4``.

    The cubic is -4 at 0 and, having a single sign change in its
    coefficients, exactly one positive root.  Bisection on
    ``[0, max(10, 2(1+c0)+10)]`` down to a 1e-14 relative bracket, then one
    Newton step kept only if it lowers the residual.
    """
    c0 = float(c0)
    if not c0 >= 0 or not math.isfinite(c0):
        raise InvalidArgument(f"c0 must be finite and non-negative, got {c0!r}")
    lo, hi = 0.0, max(10.0, 2 * (1 + c0) + 10.0)
    while r_poly(hi, c0) <= 0:  # never taken for c0 >= 0, kept as a guard
        hi *= 2
    while hi - lo > 1e-14 * hi:
        mid = 0.5 * (lo + hi)
        if r_poly(mid, c0) < 0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    dp = 3 * r ** 2 - 2 * (1 + c0) * r - 2 * (1 + SQRT2)
    if dp > 0:
        rn = r - r_poly(r, c0) / dp
        if abs(r_poly(rn, c0)) < abs(r_poly(r, c0)):
            r = rn
    return r


def _finite_or_none(v):
    return v if isinstance(v, (int, float)) and math.isfinite(v) else None


@dataclass(frozen=True)
class SharpConstants:
    gamma: float
    alpha: float
    beta: float
    mu: float
    lam: float
    k_alpha: float
    c0: float
    r_star: float
    c1: float
    c2: float
    u1: float
    t1: float

    @property
    def critical(self):
        return abs(self.alpha - (1 + 2 / self.gamma)) <= CRITICAL_TOL * self.alpha

    @property
    def shift(self):
        """``beta (lambda - alpha)``, so that ``u = t + shift``."""
        return self.beta * (self.lam - self.alpha)

    @property
    def rate(self):
        """Decay exponent ``2 alpha gamma / (gamma + 2) = gamma lambda``."""
        return self.gamma * self.lam

    def poly_residual(self):
        return abs(r_poly(self.r_star, self.c0)) if math.isfinite(self.r_star) else None

    def to_dict(self):
        d = {k: _finite_or_none(v) for k, v in asdict(self).items()}
        d["lambda"] = d.pop("lam")
        d["poly_residual"] = self.poly_residual()
        d["critical"] = self.critical
        return d


def sharp_constants(gamma, alpha, beta, mu):
    """Constants of the sharp case.

    ``c0``, ``r_star`` and everything built on them are only defined for
    ``alpha > 1 + 2/gamma``; they are ``inf``/``nan`` otherwise.
    """
    gamma, alpha, beta, mu = map(float, (gamma, alpha, beta, mu))
    if not gamma >= 1:
        raise InvalidArgument(f"gamma must be >= 1, got {gamma}")
    if not alpha > 0:
        raise InvalidArgument(f"alpha must be positive, got {alpha}")
    if not beta >= 0:
        raise InvalidArgument(f"beta must be non-negative, got {beta}")
    if not mu > 0:
        raise InvalidArgument(f"mu must be positive, got {mu}")
    lam = 2 * alpha / (gamma + 2)
    gl = gamma * lam
    k_alpha = (gl - 2) * lam / 2
    nan = float("nan")
    if gl - 2 > CRITICAL_TOL * gl:
        c0 = beta * math.sqrt(mu) * gamma * (gl - 1) / (gl - 2)
        r = solve_r_star(c0)
        c1 = (1 + 2 / r) ** 2
        c2 = (1 + c0) / r + (1 + SQRT2) / r ** 2 + 4 / (3 * r ** 3)
        u1 = alpha * r / ((gamma + 2) * math.sqrt(mu))
        t1 = u1 + beta * (alpha - lam)
    else:
        c0 = float("inf") if abs(gl - 2) <= CRITICAL_TOL * gl else nan
        r = c1 = c2 = u1 = t1 = nan
        if abs(gl - 2) <= CRITICAL_TOL * gl:
            k_alpha = 0.0
    return SharpConstants(gamma, alpha, beta, mu, lam, k_alpha, c0, r, c1, c2, u1, t1)


def phi_primitive(t, c):
    """``Phi(t) = -int_t^inf phi``, non-positive; identically 0 when ``K(alpha) = 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("phi_primitive needs t > 0")
    if c.k_alpha == 0:
        return np.zeros_like(t)[()]
    g2, sm = c.gamma + 2, math.sqrt(c.mu)
    a = c.alpha
    out = -(c.k_alpha / c.mu) * (sm * (1 + c.c0) / t + a * (1 + SQRT2) / (g2 * t ** 2)
                                 + 4 * a ** 2 / (3 * g2 ** 2 * sm * t ** 3))
    return out[()]


def phi_density(t, c):
    """Derivative of ``phi_primitive``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("phi_density needs t > 0")
    if c.k_alpha == 0:
        return np.zeros_like(t)[()]
    g2, sm = c.gamma + 2, math.sqrt(c.mu)
    a = c.alpha
    out = (c.k_alpha / (c.mu * t ** 2)) * (sm * (1 + c.c0) + 2 * a * (1 + SQRT2) / (g2 * t)
                                           + 4 * a ** 2 / (g2 ** 2 * sm * t ** 2))
    return out[()]


def energy_m_initial(obj, x0, t0, alpha, beta):
    """``E_m(t0)`` for a start at rest: ``(1 + beta alpha/t0) gap + beta^2 |grad|^2 / 2``."""
    g = np.asarray(obj.grad(np.asarray(x0, dtype=float)), dtype=float)
    return (1 + beta * alpha / t0) * obj.f_gap(x0) + 0.5 * beta ** 2 * float(g @ g)


def energy_sharp(state, obj, c):
    x, y, t = np.asarray(state.x, float), np.asarray(state.y, float), float(state.t)
    w = c.lam * (x - obj.x_star) + t * y
    return (t * t + t * c.shift) * obj.f_gap(x) + 0.5 * float(w @ w)


def energy_H_sharp(state, obj, c):
    t = float(state.t)
    u = t + c.shift
    if not u > 0:
        raise DomainError(f"H is defined for t > beta(alpha - lambda) = {-c.shift}, got t = {t}")
    if c.alpha < 1 + 2 / c.gamma and not c.critical:
        raise DomainError("H needs alpha >= 1 + 2/gamma")
    e = energy_sharp(state, obj, c)
    return e * u ** (c.rate - 2) * math.exp(-phi_primitive(u, c))


def _check_general(c, t0):
    if c.critical or not c.alpha > 1 + 2 / c.gamma:
        raise BoundNotApplicable("the general sharp bound needs alpha > 1 + 2/gamma")
    if not t0 > 0:
        raise BoundNotApplicable(f"t0 must be positive, got {t0}")


def closed_form_K(c, E_m_t0, t0, strict=False):
    """Constant ``K`` of the explicit sharp bound.

    ``C1 exp(2 gamma C2 (alpha - 1 - 2/gamma)/(gamma+2)) (1 + beta gamma sqrt(mu)/r*)
    E_m(t0) u1^(2 alpha gamma/(gamma+2))``.  With ``strict=True`` the
    ``(1 + beta gamma sqrt(mu)/r*)`` factor is squared: this is the factor
    ``(t1/u1)^2`` that a complete chain of inequalities from ``H(t1)``
    produces, which makes the bound hold for every ``beta``.
    """
    _check_general(c, t0)
    if not t0 <= c.u1 * (1 + 1e-12):
        raise BoundNotApplicable(f"closed form needs t0 <= {c.u1:.6g}, got {t0}")
    sm = math.sqrt(c.mu)
    factor = 1 + c.beta * c.gamma * sm / c.r_star
    proof_factor = 1 + c.beta * (c.alpha - c.lam) * (c.gamma + 2) * sm / (c.alpha * c.r_star)
    assert math.isclose(factor, proof_factor, rel_tol=1e-12), (factor, proof_factor)
    if strict:
        factor = factor ** 2
    expo = (2 * c.gamma / (c.gamma + 2)) * c.c2 * (c.alpha - 1 - 2 / c.gamma)
    return c.c1 * math.exp(expo) * factor * E_m_t0 * c.u1 ** c.rate


def bound_sharp_general(t, c, E_m_t0, t0, strict=False):
    """``K / (t + beta(lambda - alpha))^(2 alpha gamma/(gamma+2))`` for ``t >= t1``."""
    t = np.asarray(t, dtype=float)
    K = closed_form_K(c, E_m_t0, t0, strict=strict)
    if np.any(t < c.t1 * (1 - 1e-12)):
        raise BoundNotApplicable(f"bound holds for t >= t1 = {c.t1:.6g}")
    return (K / (t + c.shift) ** c.rate)[()]


def bound_sharp_abstract(t, c, H_ta, t_a):
    """``H(t_a) exp(Phi(u)) / (t u^(gamma lambda - 1))`` for ``t >= t_a``.

    Uses the value of ``H`` at any anchor time ``t_a > max(t0, beta(alpha-lambda))``
    instead of the closed-form estimate of ``H(t1)``.
    """
    t = np.asarray(t, dtype=float)
    if c.alpha < 1 + 2 / c.gamma and not c.critical:
        raise BoundNotApplicable("needs alpha >= 1 + 2/gamma")
    if not t_a + c.shift > 0 or np.any(t < t_a):
        raise BoundNotApplicable("needs t >= t_a > beta(alpha - lambda)")
    u = t + c.shift
    return (H_ta * np.exp(phi_primitive(u, c)) / (t * u ** (c.rate - 1)))[()]


def bound_sharp_critical(t, c, E_m_t0, t0):
    """``((t0+beta)^2 + (lambda^2 + sqrt mu)/mu) e^(beta/t0) E_m(t0) / (t (t - beta))``."""
    if not c.critical:
        raise BoundNotApplicable(f"critical bound needs alpha = 1 + 2/gamma, got alpha = {c.alpha}")
    t = np.asarray(t, dtype=float)
    if np.any(t < (t0 + c.beta) * (1 - 1e-12)):
        raise BoundNotApplicable(f"critical bound holds for t >= t0 + beta = {t0 + c.beta}")
    pre = ((t0 + c.beta) ** 2 + (c.lam ** 2 + math.sqrt(c.mu)) / c.mu) * math.exp(c.beta / t0)
    return (pre * E_m_t0 / (t * (t - c.beta)))[()]


# ---------------------------------------------------------------- flat case

@dataclass(frozen=True)
class FlatConstants:
    gamma1: float
    gamma2: float
    alpha: float
    beta: float
    mu: float
    t0: float
    p: float
    lam: float
    xi: float
    c1_flat: float
    k_growth: float
    t_m: float
    t1: float
    c2_flat: float

    @property
    def shift(self):
        return self.beta * (self.lam - self.alpha)

    @property
    def rate(self):
        """Decay exponent ``2 gamma1 / (gamma1 - 2) = p + 2``."""
        return self.p + 2

    def to_dict(self):
        d = {k: _finite_or_none(v) for k, v in asdict(self).items()}
        d["lambda"] = d.pop("lam")
        return d


def _t_m(beta, c1, p, lam, alpha):
    lo = max(beta * (alpha - lam), 0.0)
    if beta * c1 <= 0:
        return lo
    shift = beta * (lam - alpha)

    def h(t):
        return beta * c1 * t ** p / (t + shift) ** (p + 1)

    hi = max(2 * lo, 1.0)
    while h(hi) > 0.5:
        hi *= 2
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.5:
            lo = mid
        else:
            hi = mid
    return hi


def flat_constants(gamma1, gamma2, alpha, beta, mu, t0=1.0):
    gamma1, gamma2, alpha, beta, mu, t0 = map(float, (gamma1, gamma2, alpha, beta, mu, t0))
    if not (gamma1 > 2 and gamma2 > 2 and gamma1 >= gamma2):
        raise InvalidArgument(f"need gamma1 >= gamma2 > 2, got gamma1={gamma1}, gamma2={gamma2}")
    if not alpha > 0 or not beta >= 0 or not mu > 0 or not t0 > 0:
        raise InvalidArgument("need alpha > 0, beta >= 0, mu > 0, t0 > 0")
    p = 4 / (gamma1 - 2)
    lam = 2 / (gamma1 - 2)
    xi = lam * (lam + 1 - alpha)
    c1 = (p + 1) * (lam - alpha) - lam * gamma1 * (2 * (lam - alpha) + 1)
    k = mu / 2
    t_m = _t_m(beta, c1, p, lam, alpha)
    t1 = max(t0, beta * (2 * (alpha - lam) - 1), t_m)
    u1 = t1 + beta * (lam - alpha)
    if u1 > 0:
        c2 = -t1 ** (p - 2 / gamma2) / u1 ** (2 * (p + 1) / gamma2) * xi / (2 * k ** (2 / gamma2))
    else:
        c2 = float("nan")
    return FlatConstants(gamma1, gamma2, alpha, beta, mu, t0, p, lam, xi, c1, k, t_m, t1, c2)


def energy_flat(state, obj, c):
    x, y, t = np.asarray(state.x, float), np.asarray(state.y, float), float(state.t)
    d = x - obj.x_star
    w = c.lam * d + t * y
    return (t * t + t * c.shift) * obj.f_gap(x) + 0.5 * c.xi * float(d @ d) + 0.5 * float(w @ w)


def energy_flat_parts(state, obj, c):
    """``(a, b, c)`` with ``E = (t + beta(lambda - alpha)) a + t (b + xi c)``."""
    x, y, t = np.asarray(state.x, float), np.asarray(state.y, float), float(state.t)
    d = x - obj.x_star
    w = c.lam * d + t * y
    return t * obj.f_gap(x), float(w @ w) / (2 * t), float(d @ d) / (2 * t)


def energy_H_flat(state, obj, c):
    return float(state.t) ** c.p * energy_flat(state, obj, c)


# ------------------------------------------------------- trajectory series

def _trapz_cumulative(t, f):
    out = np.zeros_like(t)
    if t.size > 1:
        out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    return out


def sharp_energy_series(traj, obj, c):
    t = traj.t
    w = c.lam * (traj.x - obj.x_star) + t[:, None] * traj.y
    return (t * t + t * c.shift) * traj.f_gap + 0.5 * np.sum(w * w, axis=1)


def sharp_certificates(traj, obj, c, t_start=None):
    """``(t, H, G)`` on samples with ``t >= t_start``.

    ``G = H + beta int_{t_start}^t s u^(gamma lambda - 1) exp(-Phi(u)) |grad F|^2 ds``
    by the trapezoid rule; default ``t_start = t0 + beta(alpha - lambda)``.
    Samples where ``exp(-Phi(u))`` overflows (small ``u`` and ``mu``) are
    skipped, so the series may start later than ``t_start``.
    """
    s = traj.spec
    if t_start is None:
        t_start = s.t0 - c.shift
    m = (traj.t >= t_start) & (traj.t + c.shift > 0)
    m[m] = -np.atleast_1d(phi_primitive(traj.t[m] + c.shift, c)) < MAX_EXP
    t = traj.t[m]
    u = t + c.shift
    weight = u ** (c.rate - 2) * np.exp(-np.asarray(phi_primitive(u, c)))
    H = sharp_energy_series(traj, obj, c)[m] * weight
    integrand = c.beta * t * u * weight * traj.grad_norm[m] ** 2
    return t, H, H + _trapz_cumulative(t, integrand)


def flat_certificates(traj, obj, c, t_start=None):
    """Flat-case energies on samples with ``t >= t_start`` (default ``t1``).

    Returns a dict of arrays ``t, E, H, a, b, c, G, F, v`` where

        G = H - beta C1 int u^(p-1) a(u) du
        F = G + beta int u^(p+1) (u + beta(lambda - alpha)) |grad F|^2 du
        v = (t + beta(lambda - alpha))^(p+1) a(t)
    """
    if t_start is None:
        t_start = c.t1
    m = traj.t >= t_start
    t = traj.t[m]
    gap = traj.f_gap[m]
    d = traj.x[m] - obj.x_star
    w = c.lam * d + t[:, None] * traj.y[m]
    a = t * gap
    b = np.sum(w * w, axis=1) / (2 * t)
    cc = np.sum(d * d, axis=1) / (2 * t)
    E = (t + c.shift) * a + t * (b + c.xi * cc)
    H = t ** c.p * E
    G = H - c.beta * c.c1_flat * _trapz_cumulative(t, t ** (c.p - 1) * a)
    F = G + c.beta * _trapz_cumulative(t, t ** (c.p + 1) * (t + c.shift) * traj.grad_norm[m] ** 2)
    v = (t + c.shift) ** (c.p + 1) * a
    return {"t": t, "E": E, "H": H, "a": a, "b": b, "c": cc, "G": G, "F": F, "v": v}


def constants_json(*consts, **extra):
    """JSON text with every constants object plus ``extra`` entries."""
    doc = {}
    for c in consts:
        key = "sharp" if isinstance(c, SharpConstants) else "flat"
        doc[key] = c.to_dict()
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)
