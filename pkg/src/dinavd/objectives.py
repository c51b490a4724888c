"""Analytic test objectives with exact minimizers and geometry certificates.

Every objective carries its minimizer, minimum value and the exponents of the
growth / flatness conditions it is known to satisfy.  The sample-based
verifiers at the bottom of the module falsify those certificates on random
points of a ball around the minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import InvalidArgument, NotSupported

GEOMETRY_SLACK = 1e-12

POWER = 1
QUADFORM = 2


@dataclass(frozen=True, eq=False)
class KernelForm:
    """Closed-form description used by the compiled kernels.

    ``POWER``:    grad = coef * (gamma/2) * |d|^(gamma-2) d,  gap = coef/2 |d|^gamma
    ``QUADFORM``: grad = matrix @ d,                          gap = 1/2 d' matrix d

    with ``d = x - center``.
    """

    family: int
    center: np.ndarray
    coef: float = 0.0
    gamma: float = 2.0
    matrix: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class Objective:
    name: str
    dim: int
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    f_star: float
    x_star: np.ndarray
    gamma_flat: Optional[float] = None
    gamma_growth: Optional[float] = None
    mu: Optional[float] = None
    lipschitz_grad: Optional[float] = None
    gap: Optional[Callable[[np.ndarray], float]] = None
    kernel: Optional[KernelForm] = None
    params: dict = field(default_factory=dict)

    def f_gap(self, x):
        """``F(x) - F*``, computed without cancellation when possible."""
        if self.gap is not None:
            return float(self.gap(np.asarray(x, dtype=float)))
        return float(self.eval(np.asarray(x, dtype=float))) - self.f_star


def _point(x_star, dim):
    if x_star is None:
        return np.zeros(dim)
    x = np.atleast_1d(np.asarray(x_star, dtype=float)).copy()
    if x.size == 1 and dim > 1:
        x = np.full(dim, float(x[0]))
    if x.shape != (dim,):
        raise InvalidArgument(f"x_star has shape {x.shape}, expected ({dim},)")
    x.setflags(write=False)
    return x


def _check_dim(dim):
    if int(dim) != dim or dim < 1:
        raise InvalidArgument(f"dim must be a positive integer, got {dim!r}")
    return int(dim)


def make_quadratic(dim, mu, x_star=None):
    """``F(x) = mu/2 |x - x_star|^2``."""
    dim = _check_dim(dim)
    if not mu > 0:
        raise InvalidArgument(f"mu must be positive, got {mu!r}")
    mu = float(mu)
    c = _point(x_star, dim)

    def ev(x):
        d = np.asarray(x, dtype=float) - c
        return 0.5 * mu * float(d @ d)

    def gr(x):
        return mu * (np.asarray(x, dtype=float) - c)

    return Objective(
        name="quadratic", dim=dim, eval=ev, grad=gr, f_star=0.0, x_star=c,
        gamma_flat=2.0, gamma_growth=2.0, mu=mu, lipschitz_grad=mu, gap=ev,
        kernel=KernelForm(POWER, c, coef=mu, gamma=2.0),
        params={"dim": dim, "mu": mu, "x_star": c.tolist()},
    )


def make_power_norm(dim, gamma, mu, x_star=None):
    """``F(x) = mu/2 |x - x_star|^gamma`` for ``gamma >= 2``.

    Satisfies the flatness condition with exponent ``gamma`` as an identity,
    ``F - F* = <grad F(x), x - x*> / gamma``.  The gradient is only locally
    Lipschitz for ``gamma > 2`` so no global ``lipschitz_grad`` is set.
    """
    dim = _check_dim(dim)
    if not gamma >= 2:
        raise InvalidArgument(f"gamma must be >= 2 (C^2 objective), got {gamma!r}")
    if not mu > 0:
        raise InvalidArgument(f"mu must be positive, got {mu!r}")
    if gamma == 2:
        obj = make_quadratic(dim, mu, x_star)
        return Objective(**{**obj.__dict__, "name": "power_norm",
                            "params": {**obj.params, "gamma": 2.0}})
    mu, gamma = float(mu), float(gamma)
    c = _point(x_star, dim)

    def ev(x):
        d = np.asarray(x, dtype=float) - c
        return 0.5 * mu * float(np.sqrt(d @ d)) ** gamma

    def gr(x):
        d = np.asarray(x, dtype=float) - c
        r2 = float(d @ d)
        return (0.5 * mu * gamma * r2 ** (0.5 * gamma - 1.0)) * d

    return Objective(
        name="power_norm", dim=dim, eval=ev, grad=gr, f_star=0.0, x_star=c,
        gamma_flat=gamma, gamma_growth=gamma, mu=mu, lipschitz_grad=None, gap=ev,
        kernel=KernelForm(POWER, c, coef=mu, gamma=gamma),
        params={"dim": dim, "gamma": gamma, "mu": mu, "x_star": c.tolist()},
    )


def make_least_squares(A, b):
    """``F(x) = |Ax - b|^2`` for a full column rank ``A``.

    The minimizer comes from the SVD of ``A``; ``mu`` and ``lipschitz_grad``
    are twice the squared extreme singular values.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float)).copy()
    b = np.atleast_1d(np.asarray(b, dtype=float)).copy()
    m, n = A.shape
    if b.shape != (m,):
        raise InvalidArgument(f"b has shape {b.shape}, expected ({m},)")
    if m < n:
        raise NotSupported("A has more columns than rows; minimizer is not unique")
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    if S[-1] <= max(m, n) * np.finfo(float).eps * S[0]:
        raise NotSupported("A is rank deficient; minimizer is not unique")
    x_star = Vt.T @ ((U.T @ b) / S)
    Q = 2.0 * (A.T @ A)
    for arr in (A, b, x_star, Q):
        arr.setflags(write=False)
    r_star = A @ x_star - b
    f_star = float(r_star @ r_star)

    def ev(x):
        r = A @ np.asarray(x, dtype=float) - b
        return float(r @ r)

    # gradient taken about the computed minimizer so that grad(x_star) == 0
    def gr(x):
        return Q @ (np.asarray(x, dtype=float) - x_star)

    def gap(x):
        r = A @ (np.asarray(x, dtype=float) - x_star)
        return float(r @ r)

    return Objective(
        name="least_squares", dim=n, eval=ev, grad=gr, f_star=f_star, x_star=x_star,
        gamma_flat=2.0, gamma_growth=2.0, mu=2.0 * S[-1] ** 2,
        lipschitz_grad=2.0 * S[0] ** 2, gap=gap,
        kernel=KernelForm(QUADFORM, x_star, matrix=Q),
        params={"shape": [m, n], "sigma_min": float(S[-1]), "sigma_max": float(S[0])},
    )


def make_constant(dim, value=0.0):
    """Zero-gradient objective; every point is a minimizer (test fixture only)."""
    dim = _check_dim(dim)
    value = float(value)
    c = _point(None, dim)
    return Objective(
        name="constant", dim=dim, eval=lambda x: value,
        grad=lambda x: np.zeros(dim), f_star=value, x_star=c,
        gap=lambda x: 0.0, kernel=KernelForm(POWER, c, coef=0.0, gamma=2.0),
        params={"dim": dim, "value": value},
    )


def random_least_squares(n, seed):
    """Square problem with ``A_ij ~ N(0, 1/n)`` and ``b ~ N(0, 1)``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal(n)
    return make_least_squares(A, b)


def load_matrix_csv(path):
    """Row-major comma separated matrix without header."""
    return np.loadtxt(path, delimiter=",", ndmin=2)


# -- sampling verifiers -----------------------------------------------------

class Verdict(NamedTuple):
    holds: bool
    margin: float


class LojasiewiczVerdict(NamedTuple):
    holds: bool
    margin: float
    constant: float


def sample_ball(center, radius, samples, seed):
    """Uniform samples in the open ball ``B(center, radius)``."""
    if samples < 1 or not radius > 0:
        raise InvalidArgument("need samples >= 1 and radius > 0")
    rng = np.random.default_rng(seed)
    n = center.size
    v = rng.standard_normal((samples, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.random(samples) ** (1.0 / n)
    return center + r[:, None] * v


def verify_growth(obj, samples, radius, seed):
    """Check ``mu/2 |x - x*|^gamma <= F(x) - F*`` on random points."""
    if obj.gamma_growth is None or obj.mu is None:
        raise InvalidArgument(f"objective {obj.name!r} has no growth certificate")
    pts = sample_ball(obj.x_star, radius, samples, seed)
    margins = [obj.f_gap(x) - 0.5 * obj.mu * np.linalg.norm(x - obj.x_star) ** obj.gamma_growth
               for x in pts]
    worst = float(min(margins))
    return Verdict(worst >= -GEOMETRY_SLACK, worst)


def verify_flatness(obj, gamma, samples, radius, seed):
    """Check ``F(x) - F* <= <grad F(x), x - x*> / gamma`` on random points.

    With a small radius this is a numerical probe of the local variant of the
    condition.
    """
    pts = sample_ball(obj.x_star, radius, samples, seed)
    margins = [float(obj.grad(x) @ (x - obj.x_star)) / gamma - obj.f_gap(x) for x in pts]
    worst = float(min(margins))
    return Verdict(worst >= -GEOMETRY_SLACK, worst)


def verify_lojasiewicz(obj, samples, radius, seed):
    """Check the Lojasiewicz inequality implied by the growth certificate.

    For a quadratic growth exponent the constant is ``2 mu`` and the margin is
    ``min |grad F|^2 - 2 mu (F - F*)``.  For larger exponents the constant is
    not known in closed form; the returned ``constant`` is the smallest
    sampled ratio ``|grad F|^(g/(g-1)) / (F - F*)`` and the check passes when
    it is finite and positive.
    """
    g = obj.gamma_growth
    if g is None or obj.mu is None or g < 2:
        raise InvalidArgument(f"objective {obj.name!r} needs gamma_growth >= 2 and mu")
    pts = sample_ball(obj.x_star, radius, samples, seed)
    gaps = np.array([obj.f_gap(x) for x in pts])
    gn = np.array([np.linalg.norm(obj.grad(x)) for x in pts])
    if g == 2:
        margin = float(np.min(gn ** 2 - 2.0 * obj.mu * gaps))
        return LojasiewiczVerdict(margin >= -GEOMETRY_SLACK, margin, 2.0 * obj.mu)
    pos = gaps > 0
    ratios = gn[pos] ** (g / (g - 1.0)) / gaps[pos]
    k = float(np.min(ratios)) if ratios.size else float("nan")
    ok = bool(np.isfinite(k) and k > 0)
    margin = float(np.min(gn ** (g / (g - 1.0)) - k * gaps)) if ok else float("nan")
    return LojasiewiczVerdict(ok, margin, k)


def build_objective(block, base_dir=None):
    """Construct an objective from a config block ``{"name": ..., ...}``."""
    from pathlib import Path

    block = dict(block)
    name = block.pop("name", None)
    if name == "quadratic":
        return make_quadratic(block.get("dim", 1), block.get("mu", 1.0), block.get("x_star"))
    if name == "power_norm":
        return make_power_norm(block.get("dim", 1), block.get("gamma", 4.0),
                               block.get("mu", 0.5), block.get("x_star"))
    if name == "least_squares":
        if "A_csv" in block:
            path = Path(block["A_csv"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            A = load_matrix_csv(path)
            b = block.get("b")
            if b is None:
                raise InvalidArgument("least_squares with A_csv needs 'b'")
            return make_least_squares(A, b)
        if "A" in block:
            return make_least_squares(block["A"], block["b"])
        return random_least_squares(int(block.get("n", 50)), int(block.get("seed", 0)))
    raise InvalidArgument(f"objective.name: unknown objective {name!r}")
