# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepper for the mode ODE systems.

Same Dormand-Prince 5(4) pair, PI controller, and dense interpolant as the
pure-Python lane, specialized to the two right-hand sides that dominate
runtime: the nonlocally-coupled wave system and the linear system with a
time-dependent speed.  The nonlocal coefficient is evaluated fresh at every
stage of every step.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, sqrt, fabs, isfinite, pow, fmax, fmin

cnp.import_array()

DEF SAFE = 0.9
DEF BETA = 0.04
DEF FAC_SHRINK = 5.0
DEF FAC_GROW = 0.1

cdef double EXPO1 = 0.2 - BETA * 0.75
cdef long MAX_STEPS = 20000000

# stage coefficients
cdef double C2 = 1.0/5.0, C3 = 3.0/10.0, C4 = 4.0/5.0, C5 = 8.0/9.0
cdef double A21 = 1.0/5.0
cdef double A31 = 3.0/40.0, A32 = 9.0/40.0
cdef double A41 = 44.0/45.0, A42 = -56.0/15.0, A43 = 32.0/9.0
cdef double A51 = 19372.0/6561.0, A52 = -25360.0/2187.0
cdef double A53 = 64448.0/6561.0, A54 = -212.0/729.0
cdef double A61 = 9017.0/3168.0, A62 = -355.0/33.0, A63 = 46732.0/5247.0
cdef double A64 = 49.0/176.0, A65 = -5103.0/18656.0
cdef double A71 = 35.0/384.0, A73 = 500.0/1113.0, A74 = 125.0/192.0
cdef double A75 = -2187.0/6784.0, A76 = 11.0/84.0
cdef double E1 = 71.0/57600.0, E3 = -71.0/16695.0, E4 = 71.0/1920.0
cdef double E5 = -17253.0/339200.0, E6 = 22.0/525.0, E7 = -1.0/40.0
cdef double D1 = -12715105075.0/11282082432.0
cdef double D3 = 87487479700.0/32700410799.0
cdef double D4 = -10690763975.0/1880347072.0
cdef double D5 = 701980252875.0/199316789632.0
cdef double D6 = -1453857185.0/822651844.0
cdef double D7 = 69997945.0/29380423.0


cdef class _Problem:
    """RHS dispatch: problem 0 = nonlocal wave system, 1 = linear system."""
    cdef int problem
    cdef int kind          # 0 constant, 1 affine/sinusoid, 2 python callable
    cdef double p0, p1, p2, p3
    cdef object fn
    cdef double coef_min, coef_max

    def __init__(self, int problem, int kind, double p0, double p1,
                 double p2, double p3, object fn):
        self.problem = problem
        self.kind = kind
        self.p0 = p0
        self.p1 = p1
        self.p2 = p2
        self.p3 = p3
        self.fn = fn
        self.coef_min = 1e300
        self.coef_max = -1e300

    cdef int eval(self, int n, double* lam2, double t, double* y, double* f) except -1:
        cdef int i
        cdef double sigma, coef
        if self.problem == 0:
            sigma = 0.0
            for i in range(n):
                sigma += lam2[i] * y[i] * y[i]
            if self.kind == 0:
                coef = self.p0
            elif self.kind == 1:
                coef = self.p0 + self.p1 * sigma
            else:
                coef = <double> self.fn(sigma)
        else:
            if self.kind == 0:
                coef = self.p0
            elif self.kind == 1:
                coef = self.p0 + self.p1 * sin(self.p2 * t + self.p3)
            else:
                coef = <double> self.fn(t)
            if coef < self.coef_min:
                self.coef_min = coef
            if coef > self.coef_max:
                self.coef_max = coef
        for i in range(n):
            f[i] = y[n + i]
            f[n + i] = -coef * lam2[i] * y[i]
        return 0


def drive(int problem, cnp.ndarray[double, ndim=1] lam2_arr,
          cnp.ndarray[double, ndim=1] y0_arr, double t0, double t_end,
          double rtol, double atol, int kind, double p0, double p1,
          double p2, double p3, object fn,
          cnp.ndarray[double, ndim=1] samples_arr):
    """Integrate the selected mode system; mirrors the pure-Python driver.

    Returns (ts, ys, sample_ys, n_steps, n_accepted, n_rejected,
    coef_min, coef_max, status, nonfinite_flag) where status is 0 on
    success, 1 on step-size underflow, 2 on step-budget exhaustion; the
    nonfinite flag reports whether a NaN/Inf was seen.  Raising the typed
    errors is left to the caller.
    """
    cdef int n = lam2_arr.shape[0]
    cdef int dim = y0_arr.shape[0]
    if dim != 2 * n:
        raise ValueError("state must have length 2*n")
    cdef _Problem prob = _Problem(problem, kind, p0, p1, p2, p3, fn)

    cdef cnp.ndarray[double, ndim=1] y_arr = y0_arr.copy()
    cdef cnp.ndarray[double, ndim=1] f_arr = np.empty(dim)
    cdef cnp.ndarray[double, ndim=1] ytmp_arr = np.empty(dim)
    cdef cnp.ndarray[double, ndim=1] ynew_arr = np.empty(dim)
    cdef cnp.ndarray[double, ndim=2] kst = np.empty((7, dim))
    cdef cnp.ndarray[double, ndim=2] sample_ys = np.empty((samples_arr.shape[0], dim))

    cdef double* lam2 = &lam2_arr[0]
    cdef double* y = &y_arr[0]
    cdef double* f = &f_arr[0]
    cdef double* ytmp = &ytmp_arr[0]
    cdef double* ynew = &ynew_arr[0]
    cdef double* k1 = &kst[0, 0]
    cdef double* k2 = &kst[1, 0]
    cdef double* k3 = &kst[2, 0]
    cdef double* k4 = &kst[3, 0]
    cdef double* k5 = &kst[4, 0]
    cdef double* k6 = &kst[5, 0]
    cdef double* k7 = &kst[6, 0]
    cdef double* samples = NULL
    cdef long n_samples = samples_arr.shape[0]
    if n_samples > 0:
        samples = &samples_arr[0]

    # growable accepted-step storage
    cdef long cap = 1024
    cdef cnp.ndarray[double, ndim=1] ts_buf = np.empty(cap)
    cdef cnp.ndarray[double, ndim=2] ys_buf = np.empty((cap, dim))
    cdef long n_rec = 0

    cdef long sp = 0
    cdef int i
    cdef double t = t0
    cdef double h, h0, h1, d0, d1, d2, sc_i, acc
    cdef double err, fac11, fac, facold = 1e-4
    cdef long n_steps = 0, n_accepted = 0, n_rejected = 0
    cdef int status = 0
    cdef bint last_rejected = False, nonfinite_seen = False
    cdef double t_new, theta, th1, ydiff_i, bspl_i, r4_i, r5_i

    prob.eval(n, lam2, t0, y, f)

    # initial step size (same heuristic as the Python lane)
    d0 = 0.0
    d1 = 0.0
    for i in range(dim):
        sc_i = atol + rtol * fabs(y[i])
        acc = y[i] / sc_i
        d0 += acc * acc
        acc = f[i] / sc_i
        d1 += acc * acc
    d0 = sqrt(d0 / dim)
    d1 = sqrt(d1 / dim)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = fmin(h0, t_end - t0)
    for i in range(dim):
        ytmp[i] = y[i] + h0 * f[i]
    prob.eval(n, lam2, t0 + h0, ytmp, k2)
    d2 = 0.0
    for i in range(dim):
        sc_i = atol + rtol * fabs(y[i])
        acc = (k2[i] - f[i]) / sc_i
        d2 += acc * acc
    d2 = sqrt(d2 / dim) / h0
    if fmax(d1, d2) <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / fmax(d1, d2), 0.2)
    h = fmin(fmin(100.0 * h0, h1), t_end - t0)
    if not isfinite(h):
        h = fmin(1e-6, t_end - t0)

    ts_buf[0] = t0
    for i in range(dim):
        ys_buf[0, i] = y[i]
    n_rec = 1
    while sp < n_samples and samples[sp] <= t0:
        for i in range(dim):
            sample_ys[sp, i] = y[i]
        sp += 1

    while t < t_end:
        if n_steps >= MAX_STEPS:
            status = 2
            break
        h = fmin(h, t_end - t)
        if (not isfinite(h)) or h < 1e-14 * fmax(1.0, fabs(t)):
            status = 1
            break
        n_steps += 1

        for i in range(dim):
            k1[i] = f[i]
            ytmp[i] = y[i] + h * (A21 * k1[i])
        prob.eval(n, lam2, t + C2 * h, ytmp, k2)
        for i in range(dim):
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        prob.eval(n, lam2, t + C3 * h, ytmp, k3)
        for i in range(dim):
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        prob.eval(n, lam2, t + C4 * h, ytmp, k4)
        for i in range(dim):
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        prob.eval(n, lam2, t + C5 * h, ytmp, k5)
        for i in range(dim):
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                  + A64 * k4[i] + A65 * k5[i])
        prob.eval(n, lam2, t + h, ytmp, k6)
        for i in range(dim):
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                  + A75 * k5[i] + A76 * k6[i])
        prob.eval(n, lam2, t + h, ynew, k7)

        err = 0.0
        for i in range(dim):
            sc_i = atol + rtol * fmax(fabs(y[i]), fabs(ynew[i]))
            acc = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i]
                       + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) / sc_i
            err += acc * acc
        err = sqrt(err / dim)

        if not isfinite(err):
            nonfinite_seen = True
            n_rejected += 1
            last_rejected = True
            h *= 0.1
            continue

        fac11 = pow(err, EXPO1)
        if err <= 1.0:
            fac = fac11 / pow(facold, BETA)
            fac = fmax(FAC_GROW, fmin(FAC_SHRINK, fac / SAFE))
            if last_rejected:
                fac = fmax(fac, 1.0)
            facold = fmax(err, 1e-4)
            t_new = t + h
            if sp < n_samples and samples[sp] <= t_new:
                while sp < n_samples and samples[sp] <= t_new:
                    theta = (samples[sp] - t) / h
                    th1 = 1.0 - theta
                    for i in range(dim):
                        ydiff_i = ynew[i] - y[i]
                        bspl_i = h * k1[i] - ydiff_i
                        r4_i = ydiff_i - h * k7[i] - bspl_i
                        r5_i = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i]
                                    + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                        sample_ys[sp, i] = y[i] + theta * (
                            ydiff_i + th1 * (bspl_i + theta * (r4_i + th1 * r5_i)))
                    sp += 1
            t = t_new
            for i in range(dim):
                y[i] = ynew[i]
                f[i] = k7[i]
            if n_rec == cap:
                cap *= 2
                ts_buf = np.resize(ts_buf, cap)
                ys_new = np.empty((cap, dim))
                ys_new[:n_rec] = ys_buf[:n_rec]
                ys_buf = ys_new
            ts_buf[n_rec] = t
            for i in range(dim):
                ys_buf[n_rec, i] = y[i]
            n_rec += 1
            n_accepted += 1
            last_rejected = False
            h = h / fac
        else:
            n_rejected += 1
            last_rejected = True
            h = h / fmin(FAC_SHRINK, fac11 / SAFE)

    while sp < n_samples:
        for i in range(dim):
            sample_ys[sp, i] = y[i]
        sp += 1

    return (np.asarray(ts_buf[:n_rec]).copy(), np.asarray(ys_buf[:n_rec]).copy(),
            sample_ys, n_steps, n_accepted, n_rejected,
            prob.coef_min, prob.coef_max, status, nonfinite_seen)
