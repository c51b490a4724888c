"""Inertial dynamics with Hessian-driven damping, integrated without Hessians.

The second order system

    x'' + (alpha/t) x' + beta H_F(x) x' + c(t) grad F(x) = 0,   x'(t0) = 0,

is rewritten in the variables ``(x, y)`` with ``y = x' + beta grad F(x)``:

    x' = y - beta grad F(x)
    y' = -(alpha/t) (y - beta grad F(x)) - c(t) grad F(x)

where ``c = 1`` for DIN_AVD and AVD and ``c = 1 + beta/t`` for the modified
system.  Only gradient evaluations are needed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _backend, _dopri
from .errors import (IntegrationFailure, InvalidArgument, InvalidState,
                     OracleFailure)
from .objectives import QUADFORM

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12


class Variant(str, Enum):
    DIN_AVD = "DIN_AVD"
    AVD = "AVD"
    DIN_AVD_MODIFIED = "DIN_AVD_MODIFIED"


@dataclass(frozen=True)
class Sampling:
    """Output grid: ``count`` log-spaced times or a uniform ``step``."""

    kind: str = "log_spaced"
    count: int = 400
    step: float | None = None

    def __post_init__(self):
        if self.kind == "log_spaced":
            if int(self.count) != self.count or self.count < 2:
                raise InvalidArgument(f"sampling.count must be an integer >= 2, got {self.count!r}")
        elif self.kind == "uniform":
            if self.step is None or not self.step > 0:
                raise InvalidArgument(f"sampling.step must be positive, got {self.step!r}")
        else:
            raise InvalidArgument(f"sampling.kind must be 'log_spaced' or 'uniform', got {self.kind!r}")

    @classmethod
    def log_spaced(cls, count=400):
        return cls("log_spaced", count=count)

    @classmethod
    def uniform(cls, step):
        return cls("uniform", step=step)

    def times(self, t0, t_end):
        """Strictly increasing grid starting at ``t0`` and ending at ``t_end``."""
        if self.kind == "log_spaced":
            ts = np.geomspace(t0, t_end, int(self.count))
        else:
            n = int(np.floor((t_end - t0) / self.step + 1e-9))
            ts = t0 + self.step * np.arange(n + 1)
            ts = ts[ts < t_end * (1 - 1e-14)]
            ts = np.append(ts, t_end)
        ts[0], ts[-1] = t0, t_end
        return ts


@dataclass(frozen=True, eq=False)
class DynamicsSpec:
    variant: Variant
    alpha: float
    beta: float
    t0: float
    x0: np.ndarray
    t_end: float
    sampling: Sampling = field(default_factory=Sampling)
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        try:
            variant = Variant(self.variant)
        except ValueError:
            raise InvalidArgument(
                f"variant must be one of {[v.value for v in Variant]}, got {self.variant!r}") from None
        object.__setattr__(self, "variant", variant)
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float)).copy()
        if x0.ndim != 1 or not np.all(np.isfinite(x0)):
            raise InvalidArgument("x0 must be a finite vector")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        for name in ("alpha", "beta", "t0", "t_end", "rtol", "atol"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.alpha > 0:
            raise InvalidArgument(f"alpha must be positive, got {self.alpha}")
        if not self.beta >= 0:
            raise InvalidArgument(f"beta must be non-negative, got {self.beta}")
        if variant is Variant.AVD and self.beta != 0:
            raise InvalidArgument(f"AVD requires beta = 0, got {self.beta}")
        if not self.t0 > 0:
            raise InvalidArgument(f"t0 must be positive, got {self.t0}")
        if not self.t_end > self.t0:
            raise InvalidArgument(f"t_end must exceed t0, got {self.t_end} <= {self.t0}")
        if not (self.rtol > 0 and self.atol >= 0):
            raise InvalidArgument("rtol must be positive and atol non-negative")

    @property
    def modified(self):
        return self.variant is Variant.DIN_AVD_MODIFIED


@dataclass(frozen=True, eq=False)
class State:
    t: float
    x: np.ndarray
    y: np.ndarray


@dataclass(eq=False)
class Trajectory:
    """Sampled solution; row ``i`` of ``x``/``y`` belongs to time ``t[i]``."""

    spec: DynamicsSpec
    objective: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    f_gap: np.ndarray
    grad_norm: np.ndarray
    stats: dict = field(default_factory=dict)
    backend: str = "python"

    def __len__(self):
        return self.t.size

    def state(self, i):
        return State(float(self.t[i]), self.x[i], self.y[i])

    def to_csv(self, path, include_x=True):
        header = ["t", "f_gap", "grad_norm"]
        if include_x:
            header += [f"x_{j}" for j in range(self.x.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(self.t.size):
                row = [self.t[i], self.f_gap[i], self.grad_norm[i]]
                if include_x:
                    row += list(self.x[i])
                w.writerow([f"{v:.17g}" for v in row])


def grad_coefficient(spec, t):
    return 1.0 + spec.beta / t if spec.modified else 1.0


def vector_field(spec, obj, state):
    """Right-hand side ``(dx, dy)`` of the first order system at ``state``."""
    t = float(state.t)
    if not t > 0:
        raise InvalidState(f"t must be positive, got {t}")
    g = np.asarray(obj.grad(np.asarray(state.x, dtype=float)), dtype=float)
    dx = np.asarray(state.y, dtype=float) - spec.beta * g
    dy = -(spec.alpha / t) * dx - grad_coefficient(spec, t) * g
    return dx, dy


def _python_rhs(spec, obj):
    n = spec.x0.size
    alpha, beta, modified = spec.alpha, spec.beta, spec.modified

    def fun(t, z):
        g = obj.grad(z[:n])
        if not np.all(np.isfinite(g)):
            raise OracleFailure(f"gradient is not finite at t={t}")
        dx = z[n:] - beta * g
        cg = 1.0 + beta / t if modified else 1.0
        return np.concatenate((dx, -(alpha / t) * dx - cg * g))

    return fun


def _rk4(fun, t0, t_end, z0, ts, step):
    """Fixed step classical RK4 landing on every sample time."""
    out = np.empty((ts.size, z0.size))
    z, t = np.array(z0, dtype=float), float(t0)
    out[0] = z
    nsteps = 0
    for j in range(1, ts.size):
        m = max(1, int(np.ceil((ts[j] - t) / step - 1e-12)))
        h = (ts[j] - t) / m
        for _ in range(m):
            k1 = fun(t, z)
            k2 = fun(t + h / 2, z + h / 2 * k1)
            k3 = fun(t + h / 2, z + h / 2 * k2)
            k4 = fun(t + h, z + h * k3)
            z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            nsteps += 1
        t = ts[j]
        out[j] = z
    return out, {"nfev": 4 * nsteps, "nsteps": nsteps, "nrejected": 0,
                 "status": _dopri.OK, "t_last": t, "z_last": z}


def integrate(spec, obj, backend="auto", method="dopri5", max_step=np.inf,
              max_steps=10_000_000, rk4_step=None):
    """Integrate ``spec`` on ``obj`` from ``t0`` to ``t_end``.

    Parameters
    ----------
    backend : {'auto', 'compiled', 'python'}
        The compiled kernel covers objectives with a closed-form ``kernel``;
        anything else runs on the numpy integrator.
    method : {'dopri5', 'rk4'}
        Adaptive Dormand-Prince 5(4) with dense output, or fixed-step RK4
        (python only, step ``rk4_step``) for residual studies.

    Raises
    ------
    IntegrationFailure
        Step size underflow or step budget exhausted.
    OracleFailure
        The gradient or the state became NaN/Inf.
    """
    if spec.x0.size != obj.dim:
        raise InvalidArgument(f"x0 has dimension {spec.x0.size}, objective has {obj.dim}")
    if method not in ("dopri5", "rk4"):
        raise InvalidArgument(f"method must be 'dopri5' or 'rk4', got {method!r}")
    be = _backend.select(backend, obj.kernel, obj.dim)
    if method != "dopri5":
        be = "python"

    n = obj.dim
    g0 = np.asarray(obj.grad(spec.x0), dtype=float)
    if not np.all(np.isfinite(g0)):
        raise OracleFailure("gradient is not finite at x0")
    z0 = np.concatenate((spec.x0, spec.beta * g0))
    ts = spec.sampling.times(spec.t0, spec.t_end)

    if be == "compiled":
        k = obj.kernel
        Q = k.matrix if k.family == QUADFORM else np.zeros((1, 1))
        out, stats = _backend.kernels.dopri5_din(
            int(k.family), np.ascontiguousarray(k.center, dtype=float), float(k.coef),
            float(k.gamma), np.ascontiguousarray(Q, dtype=float), spec.alpha, spec.beta,
            int(spec.modified), spec.t0, spec.t_end, z0, ts, spec.rtol, spec.atol,
            float(max_step), 0.0, int(max_steps))
    elif method == "rk4":
        if rk4_step is None or not rk4_step > 0:
            raise InvalidArgument("rk4 requires a positive rk4_step")
        out, stats = _rk4(_python_rhs(spec, obj), spec.t0, spec.t_end, z0, ts, rk4_step)
    else:
        out, stats = _dopri.dopri5(_python_rhs(spec, obj), spec.t0, spec.t_end, z0, ts,
                                   rtol=spec.rtol, atol=spec.atol, max_step=max_step,
                                   max_steps=max_steps)

    status = stats["status"]
    if status == _dopri.NON_FINITE:
        raise OracleFailure(f"non-finite state or gradient after t={stats['t_last']}")
    if status == _dopri.STEP_UNDERFLOW:
        raise IntegrationFailure(f"step size underflow at t={stats['t_last']}",
                                 t=stats["t_last"], z=stats["z_last"])
    if status == _dopri.TOO_MANY_STEPS:
        raise IntegrationFailure(f"step budget of {max_steps} exhausted at t={stats['t_last']}",
                                 t=stats["t_last"], z=stats["z_last"])

    x, y = out[:, :n].copy(), out[:, n:].copy()
    f_gap = np.array([obj.f_gap(xi) for xi in x])
    grad_norm = np.array([np.linalg.norm(obj.grad(xi)) for xi in x])
    if not (np.all(np.isfinite(f_gap)) and np.all(np.isfinite(grad_norm))):
        raise OracleFailure("objective oracle returned a non-finite value on the trajectory")
    return Trajectory(spec, obj.name, ts, x, y, f_gap, grad_norm,
                      stats={k: v for k, v in stats.items() if k != "z_last"}, backend=be)


def energy_m(traj, obj):
    """``(1 + beta alpha / t) (F - F*) + |y|^2 / 2`` on every sample."""
    s = traj.spec
    return (1 + s.beta * s.alpha / traj.t) * traj.f_gap + 0.5 * np.sum(traj.y ** 2, axis=1)


def _fd_weights(tm, t0, tp):
    """First and second derivative weights of the 3-point stencil at ``t0``."""
    h1, h2 = t0 - tm, tp - t0
    d1 = np.array([-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))])
    d2 = np.array([2 / (h1 * (h1 + h2)), -2 / (h1 * h2), 2 / (h2 * (h1 + h2))])
    return d1, d2


def residual_check(traj, obj, points=50):
    """Max norm of the second order residual at ``points`` interior samples.

    Derivatives of ``x`` and of ``t -> grad F(x(t))`` come from 3-point
    finite differences on the sample grid, so the Hessian term never needs a
    Hessian.  Fine uniform sampling keeps the differencing error small.
    """
    if len(traj) < 5:
        raise InvalidArgument(f"residual_check needs at least 5 records, got {len(traj)}")
    if int(points) != points or points < 1:
        raise InvalidArgument(f"points must be a positive integer, got {points!r}")
    s = traj.spec
    idx = np.unique(np.linspace(1, len(traj) - 2, int(points)).round().astype(int))
    worst = 0.0
    for i in idx:
        sl = slice(i - 1, i + 2)
        d1, d2 = _fd_weights(*traj.t[sl])
        xs = traj.x[sl]
        gs = np.array([obj.grad(xi) for xi in xs])
        t = traj.t[i]
        # differences about the centre sample: exact zero on constant records
        dxs, dgs = xs - xs[1], gs - gs[1]
        xdot, xddot, gdot = d1 @ dxs, d2 @ dxs, d1 @ dgs
        r = xddot + (s.alpha / t) * xdot + s.beta * gdot + grad_coefficient(s, t) * gs[1]
        worst = max(worst, float(np.linalg.norm(r)))
    return worst
