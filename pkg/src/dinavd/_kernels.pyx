# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: DIN-AVD integration and the IGAHD recursion.

Both work on the closed-form objective families of ``objectives.KernelForm``
and reproduce, step for step, the algorithms in ``_dopri.py`` and
``schemes._igahd_python``.
"""

import numpy as np
from libc.math cimport sqrt, pow, fabs, isfinite, nextafter, INFINITY
from libc.stdlib cimport malloc, free

cdef enum:
    POWER = 1
    QUADFORM = 2

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0

cdef double Cc[6]
Cc[:] = [0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0]
cdef double Aa[6][5]
Aa[0][:] = [0.0, 0.0, 0.0, 0.0, 0.0]
Aa[1][:] = [1.0 / 5, 0.0, 0.0, 0.0, 0.0]
Aa[2][:] = [3.0 / 40, 9.0 / 40, 0.0, 0.0, 0.0]
Aa[3][:] = [44.0 / 45, -56.0 / 15, 32.0 / 9, 0.0, 0.0]
Aa[4][:] = [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0.0]
Aa[5][:] = [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656]
cdef double Bb[6]
Bb[:] = [35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84]
cdef double Ee[7]
Ee[:] = [-71.0 / 57600, 0.0, 71.0 / 16695, -71.0 / 1920, 17253.0 / 339200, -22.0 / 525, 1.0 / 40]
cdef double Pp[7][4]
Pp[0][:] = [1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432]
Pp[1][:] = [0.0, 0.0, 0.0, 0.0]
Pp[2][:] = [0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799]
Pp[3][:] = [0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072]
Pp[4][:] = [0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632]
Pp[5][:] = [0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844]
Pp[6][:] = [0.0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423]


cdef struct Field:
    int family
    int n
    double coef
    double gamma
    double alpha
    double beta
    int modified
    const double* center
    const double* Q
    double* d
    double* g


cdef inline double dot(const double* a, const double* b, int n) noexcept nogil:
    # four independent partial sums keep the FPU pipelines busy
    cdef int j = 0
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    while j + 4 <= n:
        s0 = s0 + a[j] * b[j]
        s1 = s1 + a[j + 1] * b[j + 1]
        s2 = s2 + a[j + 2] * b[j + 2]
        s3 = s3 + a[j + 3] * b[j + 3]
        j += 4
    while j < n:
        s0 = s0 + a[j] * b[j]
        j += 1
    return (s0 + s1) + (s2 + s3)


cdef inline void grad(Field* F, const double* x, double* g) noexcept nogil:
    cdef int i, j, n = F.n
    cdef double r2 = 0.0, s
    for i in range(n):
        F.d[i] = x[i] - F.center[i]
    if F.family == POWER:
        if F.gamma == 2.0:
            s = F.coef
        else:
            for i in range(n):
                r2 = r2 + F.d[i] * F.d[i]
            s = 0.5 * F.coef * F.gamma * pow(r2, 0.5 * F.gamma - 1.0)
        for i in range(n):
            g[i] = s * F.d[i]
    else:
        for i in range(n):
            g[i] = dot(F.Q + i * n, F.d, n)


cdef inline double gap(Field* F, const double* x) noexcept nogil:
    cdef int i, j, n = F.n
    cdef double r2 = 0.0, q = 0.0
    for i in range(n):
        F.d[i] = x[i] - F.center[i]
    if F.family == POWER:
        for i in range(n):
            r2 = r2 + F.d[i] * F.d[i]
        if F.gamma == 2.0:
            return 0.5 * F.coef * r2
        return 0.5 * F.coef * pow(sqrt(r2), F.gamma)
    for i in range(n):
        q = q + F.d[i] * dot(F.Q + i * n, F.d, n)
    return 0.5 * q


cdef inline void rhs(Field* F, double t, const double* z, double* out) noexcept nogil:
    cdef int i, n = F.n
    cdef double dx, cg = 1.0
    if F.modified:
        cg = 1.0 + F.beta / t
    grad(F, z, F.g)
    for i in range(n):
        dx = z[n + i] - F.beta * F.g[i]
        out[i] = dx
        out[n + i] = -(F.alpha / t) * dx - cg * F.g[i]


cdef inline bint all_finite(const double* v, int m) noexcept nogil:
    cdef int i
    for i in range(m):
        if not isfinite(v[i]):
            return False
    return True


cdef double rms_scaled(const double* e, const double* z0, const double* z1,
                       int m, double h, double rtol, double atol) noexcept nogil:
    cdef int i
    cdef double acc = 0.0, sc, a, b, v
    for i in range(m):
        a = fabs(z0[i])
        b = fabs(z1[i])
        sc = atol + (a if a > b else b) * rtol
        v = h * e[i] / sc
        acc = acc + v * v
    return sqrt(acc / m)


cdef double initial_step(Field* F, double t0, const double* z0, const double* f0,
                         double rtol, double atol, double max_step,
                         double* z1, double* f1, int m) noexcept nogil:
    cdef int i
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, sc, h0, h1, v
    for i in range(m):
        sc = atol + fabs(z0[i]) * rtol
        d0 = d0 + (z0[i] / sc) * (z0[i] / sc)
        d1 = d1 + (f0[i] / sc) * (f0[i] / sc)
    d0 = sqrt(d0 / m)
    d1 = sqrt(d1 / m)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > max_step:
        h0 = max_step
    for i in range(m):
        z1[i] = z0[i] + h0 * f0[i]
    rhs(F, t0 + h0, z1, f1)
    for i in range(m):
        sc = atol + fabs(z0[i]) * rtol
        v = (f1[i] - f0[i]) / sc
        d2 = d2 + v * v
    d2 = sqrt(d2 / m) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = 1e-6 if 1e-6 > h0 * 1e-3 else h0 * 1e-3
    else:
        h1 = pow(0.01 / (d1 if d1 > d2 else d2), 0.2)
    v = 100 * h0
    if h1 < v:
        v = h1
    if max_step < v:
        v = max_step
    h1 = 1000 * fabs(nextafter(t0, INFINITY) - t0)
    if h1 > max_step:
        h1 = max_step
    return v if v > h1 else h1


cdef void setup_field(Field* F, int family, const double[::1] center, double coef, double gamma,
                      const double[:, ::1] Q, double alpha, double beta, int modified):
    F.family = family
    F.n = center.shape[0]
    F.coef = coef
    F.gamma = gamma
    F.alpha = alpha
    F.beta = beta
    F.modified = modified
    F.center = &center[0]
    F.Q = &Q[0, 0] if family == QUADFORM else NULL


def dopri5_din(int family, const double[::1] center, double coef, double gamma, const double[:, ::1] Q,
               double alpha, double beta, int modified, double t0, double t_end,
               const double[::1] z0, const double[::1] t_samples, double rtol, double atol,
               double max_step, double first_step, long max_steps):
    cdef Field F
    setup_field(&F, family, center, coef, gamma, Q, alpha, beta, modified)
    cdef int n = F.n, m = 2 * n, i, s, r, c
    cdef Py_ssize_t ns = t_samples.shape[0], j = 0
    out_arr = np.full((ns, m), np.nan)
    cdef double[:, ::1] out = out_arr
    cdef double* buf = <double*> malloc((2 * n + 12 * m + 4 * m) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    F.d = buf
    F.g = buf + n
    cdef double* z = buf + 2 * n
    cdef double* zn = z + m
    cdef double* f = zn + m
    cdef double* fn = f + m
    cdef double* tmp = fn + m
    cdef double* K = tmp + m          # 7 x m, row-major by stage
    cdef double* Qd = K + 7 * m       # m x 4 dense output coefficients
    cdef double t = t0, t_new, h, h_eff, err, factor, th, acc, a, minh
    cdef long nsteps = 0, nrej = 0, nfev = 0
    cdef int status = 0
    cdef bint rejected

    try:
        for i in range(m):
            z[i] = z0[i]
        rhs(&F, t, z, f)
        nfev = 1
        if not all_finite(f, m):
            status = 2
        else:
            while j < ns and t_samples[j] <= t:
                for i in range(m):
                    out[j, i] = z[i]
                j += 1
            if first_step <= 0:
                h = initial_step(&F, t, z, f, rtol, atol, max_step, zn, fn, m)
                nfev += 1
            else:
                h = first_step if first_step < max_step else max_step

            with nogil:
                while t < t_end:
                    if nsteps >= max_steps:
                        status = 3
                        break
                    minh = 10 * fabs(nextafter(t, INFINITY) - t)
                    if h < minh:
                        status = 1
                        break
                    rejected = False
                    while True:
                        if h > max_step:
                            h = max_step
                        t_new = t + h
                        if t_new >= t_end:
                            t_new = t_end
                        h_eff = t_new - t
                        for i in range(m):
                            K[i] = f[i]
                        for s in range(1, 6):
                            for i in range(m):
                                acc = 0.0
                                for r in range(s):
                                    acc = acc + K[r * m + i] * Aa[s][r]
                                tmp[i] = z[i] + acc * h_eff
                            rhs(&F, t + Cc[s] * h_eff, tmp, K + s * m)
                        for i in range(m):
                            acc = 0.0
                            for r in range(6):
                                acc = acc + K[r * m + i] * Bb[r]
                            zn[i] = z[i] + h_eff * acc
                        rhs(&F, t_new, zn, K + 6 * m)
                        for i in range(m):
                            fn[i] = K[6 * m + i]
                        nfev += 6
                        if not (all_finite(zn, m) and all_finite(fn, m)):
                            status = 2
                            break
                        for i in range(m):
                            acc = 0.0
                            for r in range(7):
                                acc = acc + K[r * m + i] * Ee[r]
                            tmp[i] = acc
                        err = rms_scaled(tmp, z, zn, m, h_eff, rtol, atol)
                        if err < 1.0:
                            if err == 0.0:
                                factor = MAX_FACTOR
                            else:
                                factor = SAFETY * pow(err, -0.2)
                                if factor > MAX_FACTOR:
                                    factor = MAX_FACTOR
                            if rejected and factor > 1.0:
                                factor = 1.0
                            h = h_eff * factor
                            break
                        nrej += 1
                        factor = SAFETY * pow(err, -0.2)
                        if factor < MIN_FACTOR:
                            factor = MIN_FACTOR
                        h = h_eff * factor
                        rejected = True
                        if h < 10 * fabs(nextafter(t, INFINITY) - t):
                            status = 1
                            break
                    if status != 0:
                        break

                    if j < ns and t_samples[j] <= t_new:
                        for i in range(m):
                            for c in range(4):
                                acc = 0.0
                                for r in range(7):
                                    acc = acc + K[r * m + i] * Pp[r][c]
                                Qd[i * 4 + c] = acc
                        while j < ns and t_samples[j] <= t_new:
                            if t_samples[j] == t_new:
                                for i in range(m):
                                    out[j, i] = zn[i]
                            else:
                                th = (t_samples[j] - t) / h_eff
                                for i in range(m):
                                    acc = Qd[i * 4] * th + Qd[i * 4 + 1] * th * th \
                                        + Qd[i * 4 + 2] * (th * th * th) \
                                        + Qd[i * 4 + 3] * (th * th * th * th)
                                    out[j, i] = z[i] + h_eff * acc
                            j += 1
                    t = t_new
                    for i in range(m):
                        z[i] = zn[i]
                        f[i] = fn[i]
                    nsteps += 1

        z_last = np.array([z[i] for i in range(m)])
    finally:
        free(buf)
    stats = {"nfev": nfev, "nsteps": nsteps, "nrejected": nrej, "status": status,
             "t_last": t, "z_last": z_last}
    return out_arr, stats


def igahd(int family, const double[::1] center, double coef, double gamma, const double[:, ::1] Q,
          double alpha, double beta, double s, const double[::1] x0, long max_iter,
          double blowup):
    """Run the IGAHD recursion; returns ``(xs, count)`` with ``xs[k-1] = x_k``.

    Stops early at the first iterate whose gap is non-finite or above
    ``blowup``; that iterate is not included in ``count``.
    """
    cdef Field F
    setup_field(&F, family, center, coef, gamma, Q, 0.0, 0.0, 0)
    cdef int n = F.n, i
    cdef long k, count = 0
    xs_arr = np.empty((max_iter, n))
    cdef double[:, ::1] xs = xs_arr
    cdef double* buf = <double*> malloc(7 * n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    F.d = buf
    F.g = buf + n
    cdef double* xp = buf + 2 * n
    cdef double* gp = buf + 3 * n
    cdef double* y = buf + 4 * n
    cdef double* x = buf + 5 * n
    cdef double* gx = buf + 6 * n
    cdef double bs = beta * sqrt(s), ak, gv
    try:
        with nogil:
            for i in range(n):
                xp[i] = x0[i]
                y[i] = x0[i]
            grad(&F, xp, gp)
            for k in range(1, max_iter + 1):
                grad(&F, y, F.g)
                for i in range(n):
                    x[i] = y[i] - s * F.g[i]
                grad(&F, x, gx)
                ak = (k - 1.0) / (k + alpha - 1.0)
                for i in range(n):
                    y[i] = x[i] + ak * (x[i] - xp[i]) - bs * (gx[i] - gp[i]) - (bs / k) * gp[i]
                if F.family == QUADFORM:
                    gv = 0.5 * dot(F.d, gx, n)  # F.d still holds x - center
                else:
                    gv = gap(&F, x)
                if not (isfinite(gv) and gv <= blowup and all_finite(x, n)):
                    break
                for i in range(n):
                    xs[count, i] = x[i]
                    xp[i] = x[i]
                    gp[i] = gx[i]
                count += 1
    finally:
        free(buf)
    return xs_arr[:count], count
