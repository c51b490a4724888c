"""Discrete schemes: IGAHD, Nesterov (its beta = 0 case) and gradient descent.

IGAHD replaces the Hessian-driven damping by a difference of gradients:

    x_k = y_{k-1} - s grad F(y_{k-1})
    y_k = x_k + a_k (x_k - x_{k-1}) - beta sqrt(s) (grad F(x_k) - grad F(x_{k-1}))
              - (beta sqrt(s) / k) grad F(x_{k-1}),        a_k = (k-1)/(k+alpha-1)

started from ``x_{-1} = x_0 = y_0 = x0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvalidArgument
from .objectives import QUADFORM

BLOWUP = 1e12


@dataclass(frozen=True, eq=False)
class SchemeConfig:
    alpha: float
    beta: float
    s: float
    max_iter: int
    x0: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "s"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.alpha > 0:
            raise InvalidArgument(f"alpha must be positive, got {self.alpha}")
        if not self.beta >= 0:
            raise InvalidArgument(f"beta must be non-negative, got {self.beta}")
        if not self.s > 0:
            raise InvalidArgument(f"s must be positive, got {self.s}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidArgument(f"max_iter must be a positive integer, got {self.max_iter!r}")
        object.__setattr__(self, "max_iter", int(self.max_iter))
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float)).copy()
        if x0.ndim != 1 or not np.all(np.isfinite(x0)):
            raise InvalidArgument("x0 must be a finite vector")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    def guarantee(self, lipschitz):
        """``alpha >= 3``, ``s <= 1/L`` and ``0 <= beta < 2 sqrt(s)``."""
        if lipschitz is None:
            return False
        return self.alpha >= 3 and self.s <= 1 / lipschitz and self.beta < 2 * math.sqrt(self.s)


@dataclass(eq=False)
class IterateLog:
    """Iterates ``x_1 .. x_K``; ``k`` starts at 1."""

    k: np.ndarray
    x: np.ndarray
    f_gap: np.ndarray
    grad_norm: np.ndarray
    diverged: bool = False
    guarantee: bool = False
    scheme: str = "igahd"
    params: dict = field(default_factory=dict)
    backend: str = "python"

    def __len__(self):
        return self.k.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "f_gap", "grad_norm"])
            for i in range(self.k.size):
                w.writerow([str(int(self.k[i])), f"{self.f_gap[i]:.17g}", f"{self.grad_norm[i]:.17g}"])


def _igahd_python(cfg, obj):
    s, alpha = cfg.s, cfg.alpha
    bs = cfg.beta * math.sqrt(s)
    x_prev = cfg.x0.copy()
    y = cfg.x0.copy()
    g_prev = obj.grad(x_prev)
    xs = []
    for k in range(1, cfg.max_iter + 1):
        x = y - s * obj.grad(y)
        gx = obj.grad(x)
        ak = (k - 1.0) / (k + alpha - 1.0)
        y = x + ak * (x - x_prev) - bs * (gx - g_prev) - (bs / k) * g_prev
        gv = obj.f_gap(x)
        if not (math.isfinite(gv) and gv <= BLOWUP and np.all(np.isfinite(x))):
            break
        xs.append(x)
        x_prev, g_prev = x, gx
    return np.array(xs).reshape(len(xs), cfg.x0.size)


def _finish(xs, cfg, obj, scheme, backend, guarantee):
    f_gap = np.array([obj.f_gap(x) for x in xs])
    grad_norm = np.array([np.linalg.norm(obj.grad(x)) for x in xs])
    ok = np.isfinite(f_gap) & np.isfinite(grad_norm) & (f_gap <= BLOWUP)
    n = int(np.argmin(ok)) if not ok.all() else ok.size
    diverged = n < cfg.max_iter
    return IterateLog(np.arange(1, n + 1), xs[:n], f_gap[:n], grad_norm[:n], diverged,
                      guarantee, scheme,
                      {"alpha": cfg.alpha, "beta": cfg.beta, "s": cfg.s, "max_iter": cfg.max_iter},
                      backend)


def igahd_run(cfg, obj, backend="auto"):
    """Run IGAHD; stops at the first non-finite iterate or gap above 1e12."""
    if cfg.x0.size != obj.dim:
        raise InvalidArgument(f"x0 has dimension {cfg.x0.size}, objective has {obj.dim}")
    be = _backend.select(backend, obj.kernel, obj.dim)
    if be == "compiled":
        k = obj.kernel
        Q = k.matrix if k.family == QUADFORM else np.zeros((1, 1))
        xs, _ = _backend.kernels.igahd(
            int(k.family), np.ascontiguousarray(k.center, dtype=float), float(k.coef),
            float(k.gamma), np.ascontiguousarray(Q, dtype=float), cfg.alpha, cfg.beta,
            cfg.s, np.ascontiguousarray(cfg.x0), cfg.max_iter, BLOWUP)
    else:
        xs = _igahd_python(cfg, obj)
    scheme = "nesterov" if cfg.beta == 0 else "igahd"
    return _finish(xs, cfg, obj, scheme, be, cfg.guarantee(obj.lipschitz_grad))


def gradient_descent_run(s, max_iter, x0, obj):
    """``x_{k+1} = x_k - s grad F(x_k)``."""
    cfg = SchemeConfig(alpha=1.0, beta=0.0, s=s, max_iter=max_iter, x0=x0)
    if cfg.x0.size != obj.dim:
        raise InvalidArgument(f"x0 has dimension {cfg.x0.size}, objective has {obj.dim}")
    x = cfg.x0.copy()
    xs = []
    for _ in range(cfg.max_iter):
        x = x - cfg.s * obj.grad(x)
        gv = obj.f_gap(x)
        if not (math.isfinite(gv) and gv <= BLOWUP and np.all(np.isfinite(x))):
            break
        xs.append(x)
    xs = np.array(xs).reshape(len(xs), cfg.x0.size)
    L = obj.lipschitz_grad
    log = _finish(xs, cfg, obj, "gradient_descent", "python", L is not None and cfg.s <= 1 / L)
    log.params = {"s": cfg.s, "max_iter": cfg.max_iter}
    return log


def oscillation_metric(log, from_iter, to_iter=None):
    """Strict local maxima count and total variation of ``k -> f_gap_k``.

    Only iterations ``from_iter <= k <= to_iter`` are scanned.
    """
    if int(from_iter) != from_iter or from_iter < 1:
        raise InvalidArgument(f"from_iter must be a positive integer, got {from_iter!r}")
    if len(log) <= from_iter + 10:
        raise InvalidArgument(f"log has {len(log)} iterates, need more than {from_iter + 10}")
    m = log.k >= from_iter
    if to_iter is not None:
        m &= log.k <= to_iter
    f = log.f_gap[m]
    count = int(np.sum((f[1:-1] > f[:-2]) & (f[1:-1] > f[2:])))
    return count, float(np.sum(np.abs(np.diff(f))))
