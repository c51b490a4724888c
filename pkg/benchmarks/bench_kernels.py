"""Compare the compiled kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each case runs once per backend to warm up, then ``repeat`` timed runs; the
table reports the best time and the largest relative difference between the
two backends' outputs. The last column is the backend that ``backend="auto"``
selects for the case.
"""

import argparse
import math
import time

import numpy as np

from dinavd import _backend
from dinavd.dynamics import DynamicsSpec, Sampling, integrate
from dinavd.objectives import make_power_norm, make_quadratic, random_least_squares
from dinavd.schemes import SchemeConfig, igahd_run


def _dyn(obj, x0, t_end):
    spec = DynamicsSpec("DIN_AVD", 4.0, 0.5, 1.0, x0, t_end, Sampling.log_spaced(400), 1e-10, 1e-14)
    return obj, lambda be: integrate(spec, obj, backend=be).x


def _igahd(n, iters):
    obj = random_least_squares(n, 0)
    x0 = np.random.default_rng(1).standard_normal(n)
    s = 1 / obj.lipschitz_grad
    cfg = SchemeConfig(3.0, math.sqrt(s), s, iters, x0)
    return obj, lambda be: igahd_run(cfg, obj, backend=be).x


CASES = {
    "dopri5 quadratic 2-D, T=1e4": _dyn(make_quadratic(2, 1.0), [1.0, 1.0], 1e4),
    "dopri5 |x|^4 2-D, T=1e4": _dyn(make_power_norm(2, 4.0, 0.5), [1.0, -0.5], 1e4),
    "dopri5 least squares N=50, T=1e3": _dyn(random_least_squares(50, 0), np.ones(50), 1e3),
    "igahd least squares N=50, 5000 it": _igahd(50, 5000),
    "igahd least squares N=500, 5000 it": _igahd(500, 5000),
}


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _backend.HAVE_COMPILED:
        raise SystemExit("compiled extension not available; build with pip install -e .")
    print(f"{'case':38s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s} {'max rel diff':>13s} {'auto':>9s}")
    for name, (obj, case) in CASES.items():
        tp, xp = best_time(lambda: case("python"), args.repeat)
        tc, xc = best_time(lambda: case("compiled"), args.repeat)
        diff = float(np.max(np.abs(xc - xp) / (np.abs(xp) + 1e-12)))
        print(f"{name:38s} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f} {diff:13.2e} "
              f"{_backend.select('auto', obj.kernel, obj.dim):>9s}")


if __name__ == "__main__":
    main()
