# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused simulation loop for harmonic-family instances.

Arithmetic order matches ``_fused_py`` exactly; keep the two in step.
"""

from libc.math cimport sin, cos, exp, sqrt, pow, fabs, isfinite, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np

cdef double MIN_MARGIN = 1e-12
cdef double MAX_CONDITION = 1e12

cdef enum:
    OK = 0
    DOMAIN = 1
    RETRY_FAILED = 2
    NONFINITE = 3
    SINGULAR = 4


cdef inline double _sgn(double v, double eps) nogil:
    if eps > 0.0:
        return v / (fabs(v) + eps)
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


cdef inline double _sigp(double v, double a) nogil:
    if v > 0.0:
        return pow(v, a)
    if v < 0.0:
        return -pow(-v, a)
    return 0.0


cdef struct Model:
    int N
    int n
    const double* weight
    const double* ref
    const long* cptr
    const double* cnormal
    const double* cbound
    const double* barrier
    const double* dist
    const long* nptr
    const long* nidx
    double k0, k1, k2, rho1, rho2, beta
    bint consensus, sliding, disturb
    double eps
    double* grad
    double* gtp
    double* H
    double* rhs
    double* L
    double* y
    double* u


cdef int _cholesky_solve(Model* M) nogil:
    cdef int n = M.n
    cdef int i, j, k
    cdef double s, d
    cdef double dmin = INFINITY
    cdef double dmax = 0.0
    cdef double* H = M.H
    cdef double* L = M.L
    for j in range(n):
        s = H[j * n + j]
        for k in range(j):
            s -= L[j * n + k] * L[j * n + k]
        if not s > 0.0:
            return 0
        d = sqrt(s)
        L[j * n + j] = d
        if d < dmin:
            dmin = d
        if d > dmax:
            dmax = d
        for i in range(j + 1, n):
            s = H[i * n + j]
            for k in range(j):
                s -= L[i * n + k] * L[j * n + k]
            L[i * n + j] = s / d
    if (dmax / dmin) * (dmax / dmin) > MAX_CONDITION:
        return 0
    for i in range(n):
        s = M.rhs[i]
        for k in range(i):
            s -= L[i * n + k] * M.y[k]
        M.y[i] = s / L[i * n + i]
    for i in range(n - 1, -1, -1):
        s = M.y[i]
        for k in range(i + 1, n):
            s -= L[k * n + i] * M.u[k]
        M.u[i] = s / L[i * n + i]
    return 1


cdef int _margins(Model* M, const double* x, double t, double* out) nogil:
    cdef int n = M.n
    cdef int i, k
    cdef long q
    cdef double sigma, wt, bval, g, m
    cdef int bad = -1
    for i in range(M.N):
        sigma = M.barrier[4 * i + 2] * exp(-M.barrier[4 * i + 3] * t)
        for q in range(M.cptr[i], M.cptr[i + 1]):
            wt = M.cbound[4 * q + 3] * t
            bval = M.cbound[4 * q] + M.cbound[4 * q + 1] * sin(wt) + M.cbound[4 * q + 2] * cos(wt)
            g = 0.0
            for k in range(n):
                g += M.cnormal[q * n + k] * x[i * n + k]
            g = g - bval
            m = sigma - g
            out[q] = -m
            if not m > MIN_MARGIN and bad < 0:
                bad = i
    return bad


cdef int _controls(Model* M, double t, const double* x, const double* z,
                   double* u1, double* u2, double* d, int* agent) nogil:
    cdef int N = M.N
    cdef int n = M.n
    cdef int i, k, l, j, p
    cdef long q, e
    cdef double a1, a2, a3, a4, rho, sigma, rho_dot, sigma_dot, w2
    cdef double om, wt, sn, cs, r, rdot, bval, bdot, g, m, gap_rate, a_k, v, c, xi, s
    for i in range(N):
        a1 = M.barrier[4 * i]
        a2 = M.barrier[4 * i + 1]
        a3 = M.barrier[4 * i + 2]
        a4 = M.barrier[4 * i + 3]
        rho = a1 * exp(a2 * t)
        sigma = a3 * exp(-a4 * t)
        rho_dot = a2 * rho
        sigma_dot = -a4 * sigma
        w2 = 2.0 * M.weight[i]
        for k in range(n):
            p = 4 * (i * n + k)
            om = M.ref[p + 3]
            wt = om * t
            sn = sin(wt)
            cs = cos(wt)
            r = M.ref[p] + M.ref[p + 1] * sn + M.ref[p + 2] * cs
            rdot = om * (M.ref[p + 1] * cs - M.ref[p + 2] * sn)
            M.grad[k] = w2 * (x[i * n + k] - r)
            M.gtp[k] = -w2 * rdot
            for l in range(n):
                M.H[k * n + l] = w2 if k == l else 0.0
        for q in range(M.cptr[i], M.cptr[i + 1]):
            om = M.cbound[4 * q + 3]
            wt = om * t
            sn = sin(wt)
            cs = cos(wt)
            bval = M.cbound[4 * q] + M.cbound[4 * q + 1] * sn + M.cbound[4 * q + 2] * cs
            bdot = om * (M.cbound[4 * q + 1] * cs - M.cbound[4 * q + 2] * sn)
            g = 0.0
            for k in range(n):
                g += M.cnormal[q * n + k] * x[i * n + k]
            g = g - bval
            m = sigma - g
            if not m > MIN_MARGIN:
                agent[0] = i
                return DOMAIN
            gap_rate = sigma_dot + bdot
            for k in range(n):
                a_k = M.cnormal[q * n + k]
                M.grad[k] += a_k / (rho * m)
                M.gtp[k] += -rho_dot / (rho * rho) * a_k / m
                M.gtp[k] += (0.0 - a_k * gap_rate / (m * m)) / rho
                for l in range(n):
                    M.H[k * n + l] += a_k * M.cnormal[q * n + l] / (m * m) / rho
        for k in range(n):
            v = M.grad[k] + M.gtp[k]
            if M.consensus:
                c = 0.0
                xi = x[i * n + k]
                for e in range(M.nptr[i], M.nptr[i + 1]):
                    c += _sgn(xi - x[M.nidx[e] * n + k], M.eps)
                v = M.beta * c + v
            M.rhs[k] = v
        if not _cholesky_solve(M):
            agent[0] = i
            return SINGULAR
        for k in range(n):
            j = i * n + k
            u1[j] = -M.u[k]
            if M.sliding:
                s = x[j] - z[j]
                u2[j] = -M.k0 * _sgn(s, M.eps) - M.k1 * _sigp(s, M.rho1) - M.k2 * _sigp(s, M.rho2)
            else:
                u2[j] = 0.0
            if M.disturb:
                p = 4 * j
                wt = M.dist[p + 3] * t
                d[j] = M.dist[p] + M.dist[p + 1] * sin(wt) + M.dist[p + 2] * cos(wt)
            else:
                d[j] = 0.0
    return OK


cdef int _loop(Model* M, double* x, double* z, double* xn, double* zn, double* u1, double* u2, double* d,
               double* marg, double* scratch, double dt, long n_steps, long stride,
               double[::1] out_t, double[:, ::1] out_x, double[:, ::1] out_s, double[:, ::1] out_u1,
               double[:, ::1] out_u2, double[:, ::1] out_d, double[:, ::1] out_m,
               long* fail_step, int* fail_agent, long* rec_out) nogil:
    cdef int size = M.N * M.n
    cdef long Q = M.cptr[M.N]
    cdef long step, rec = 0
    cdef int j, sub, status, bad
    cdef long q
    cdef double t, ts
    cdef double h = dt / 10.0
    cdef int agent = -1
    cdef double* tmp
    for step in range(n_steps + 1):
        t = step * dt
        status = _controls(M, t, x, z, u1, u2, d, &agent)
        if status != OK:
            fail_step[0] = step
            fail_agent[0] = agent
            rec_out[0] = rec
            return status
        if step % stride == 0 or step == n_steps:
            _margins(M, x, t, marg)
            out_t[rec] = t
            for j in range(size):
                out_x[rec, j] = x[j]
                out_s[rec, j] = x[j] - z[j]
                out_u1[rec, j] = u1[j]
                out_u2[rec, j] = u2[j]
                out_d[rec, j] = d[j]
            for q in range(Q):
                out_m[rec, q] = marg[q]
            rec += 1
        if step == n_steps:
            break
        for j in range(size):
            xn[j] = x[j] + dt * ((u1[j] + u2[j]) + d[j])
            zn[j] = z[j] + dt * u1[j]
        for j in range(size):
            if not isfinite(xn[j]):
                fail_step[0] = step
                fail_agent[0] = -1
                rec_out[0] = rec
                return NONFINITE
        if _margins(M, xn, (step + 1) * dt, scratch) >= 0:
            for j in range(size):
                xn[j] = x[j]
                zn[j] = z[j]
            for sub in range(10):
                ts = t + sub * h
                if sub > 0:
                    status = _controls(M, ts, xn, zn, u1, u2, d, &agent)
                    if status != OK:
                        fail_step[0] = step
                        fail_agent[0] = agent
                        rec_out[0] = rec
                        return RETRY_FAILED
                for j in range(size):
                    xn[j] = xn[j] + h * ((u1[j] + u2[j]) + d[j])
                    zn[j] = zn[j] + h * u1[j]
                bad = _margins(M, xn, ts + h, scratch)
                if bad >= 0:
                    fail_step[0] = step
                    fail_agent[0] = bad
                    rec_out[0] = rec
                    return RETRY_FAILED
        tmp = x
        x = xn
        xn = tmp
        tmp = z
        z = zn
        zn = tmp
    fail_step[0] = n_steps
    fail_agent[0] = -1
    rec_out[0] = rec
    return OK


def simulate(
    int N, int n, const double[::1] weight, const double[::1] ref, const long[::1] cptr,
    const double[::1] cnormal, const double[::1] cbound, const double[::1] barrier, const double[::1] dist,
    const long[::1] nptr, const long[::1] nidx, gains, flags, x0, double dt, long n_steps, long stride,
    double sign_eps,
    double[::1] out_t, double[:, ::1] out_x, double[:, ::1] out_s, double[:, ::1] out_u1,
    double[:, ::1] out_u2, double[:, ::1] out_d, double[:, ::1] out_m,
):
    """Compiled counterpart of ``_fused_py.simulate``; identical contract."""
    cdef Model M
    cdef int size = N * n
    cdef long Q = cptr[N]
    cdef int j, status
    cdef long fail_step = 0
    cdef int fail_agent = -1
    cdef long rec = 0
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    M.N = N
    M.n = n
    M.weight = &weight[0]
    M.ref = &ref[0]
    M.cptr = &cptr[0]
    M.cnormal = &cnormal[0] if cnormal.shape[0] > 0 else NULL
    M.cbound = &cbound[0] if cbound.shape[0] > 0 else NULL
    M.barrier = &barrier[0]
    M.dist = &dist[0]
    M.nptr = &nptr[0]
    M.nidx = &nidx[0] if nidx.shape[0] > 0 else NULL
    M.k0, M.k1, M.k2, M.rho1, M.rho2, M.beta = [float(g) for g in gains]
    M.consensus, M.sliding, M.disturb = [bool(f) for f in flags]
    M.eps = sign_eps
    cdef double* buf = <double*> malloc(sizeof(double) * (7 * size + 2 * (Q + 1) + 5 * n + 2 * n * n))
    if buf == NULL:
        raise MemoryError()
    cdef double* x = buf
    cdef double* z = x + size
    cdef double* xn = z + size
    cdef double* zn = xn + size
    cdef double* u1 = zn + size
    cdef double* u2 = u1 + size
    cdef double* d = u2 + size
    cdef double* marg = d + size
    cdef double* scratch = marg + Q + 1
    M.grad = scratch + Q + 1
    M.gtp = M.grad + n
    M.rhs = M.gtp + n
    M.y = M.rhs + n
    M.u = M.y + n
    M.H = M.u + n
    M.L = M.H + n * n
    for j in range(size):
        x[j] = x0v[j]
        z[j] = 0.0
    try:
        with nogil:
            status = _loop(&M, x, z, xn, zn, u1, u2, d, marg, scratch, dt, n_steps, stride,
                           out_t, out_x, out_s, out_u1, out_u2, out_d, out_m,
                           &fail_step, &fail_agent, &rec)
    finally:
        free(buf)
    return status, fail_step, fail_agent, rec
