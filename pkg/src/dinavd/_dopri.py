"""Dormand-Prince 5(4) with 4th order dense output, pure Python/numpy.

This is the reference implementation of the integration kernel; the compiled
module ``_kernels`` runs the same step-size controller and interpolant on
closed-form vector fields.
"""

import numpy as np

OK, STEP_UNDERFLOW, NON_FINITE, TOO_MANY_STEPS = 0, 1, 2, 3

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY, MIN_FACTOR, MAX_FACTOR = 0.9, 0.2, 10.0
ERR_EXP = -1.0 / 5.0


def rms(v):
    return float(np.sqrt(np.mean(v * v)))


def initial_step(fun, t0, z0, f0, direction, rtol, atol, max_step):
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    scale = atol + np.abs(z0) * rtol
    d0, d1 = rms(z0 / scale), rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    z1 = z0 + h0 * direction * f0
    f1 = fun(t0 + h0 * direction, z1)
    d2 = rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h0, h1, max_step)
    # components starting at 0 under a tiny atol drive the estimate to ~0
    return max(h, min(1000 * abs(np.nextafter(t0, np.inf) - t0), max_step))


def dopri5(fun, t0, t_end, z0, t_samples, rtol=1e-9, atol=1e-12,
           max_step=np.inf, first_step=None, max_steps=10_000_000):
    """Integrate ``z' = fun(t, z)`` on ``[t0, t_end]`` and sample the solution.

    Returns
    -------
    samples : ndarray, shape (len(t_samples), z0.size)
        Rows past a failure are left as NaN.
    stats : dict
        ``nfev``, ``nsteps``, ``nrejected``, ``status``, ``t_last``, ``z_last``.
    """
    z = np.array(z0, dtype=float)
    n = z.size
    ts = np.asarray(t_samples, dtype=float)
    out = np.full((ts.size, n), np.nan)
    t = float(t0)
    f = fun(t, z)
    nfev = 1
    stats = {"nfev": 0, "nsteps": 0, "nrejected": 0, "status": OK, "t_last": t, "z_last": z}
    if not np.all(np.isfinite(f)):
        stats.update(nfev=nfev, status=NON_FINITE)
        return out, stats

    j = 0
    while j < ts.size and ts[j] <= t:
        out[j] = z
        j += 1

    if first_step is None:
        h = initial_step(fun, t, z, f, 1.0, rtol, atol, max_step)
        nfev += 1
    else:
        h = min(float(first_step), max_step)

    K = np.empty((7, n))
    nsteps = nrej = 0
    status = OK
    while t < t_end:
        if nsteps >= max_steps:
            status = TOO_MANY_STEPS
            break
        min_step = 10 * abs(np.nextafter(t, np.inf) - t)
        if h < min_step:
            status = STEP_UNDERFLOW
            break
        rejected = False
        while True:
            h = min(h, max_step)
            t_new = t + h
            if t_new >= t_end:
                t_new = t_end
            h_eff = t_new - t
            K[0] = f
            for s in range(1, 6):
                dz = K[:s].T @ A[s] * h_eff
                K[s] = fun(t + C[s] * h_eff, z + dz)
            z_new = z + h_eff * (K[:6].T @ B)
            f_new = fun(t_new, z_new)
            K[6] = f_new
            nfev += 6
            if not (np.all(np.isfinite(z_new)) and np.all(np.isfinite(f_new))):
                status = NON_FINITE
                break
            scale = atol + np.maximum(np.abs(z), np.abs(z_new)) * rtol
            err = rms(h_eff * (K.T @ E) / scale)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** ERR_EXP)
                if rejected:
                    factor = min(1.0, factor)
                h = h_eff * factor
                break
            nrej += 1
            h = h_eff * max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
            rejected = True
            if h < 10 * abs(np.nextafter(t, np.inf) - t):
                status = STEP_UNDERFLOW
                break
        if status != OK:
            break

        if j < ts.size and ts[j] <= t_new:
            Q = K.T @ P
            while j < ts.size and ts[j] <= t_new:
                if ts[j] == t_new:
                    out[j] = z_new
                else:
                    th = (ts[j] - t) / h_eff
                    out[j] = z + h_eff * (Q @ np.array([th, th * th, th ** 3, th ** 4]))
                j += 1
        t, z, f = t_new, z_new, f_new
        nsteps += 1

    stats.update(nfev=nfev, nsteps=nsteps, nrejected=nrej, status=status,
                 t_last=t, z_last=z)
    return out, stats
