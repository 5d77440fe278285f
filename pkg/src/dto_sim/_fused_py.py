"""Pure-Python fused simulation loop for harmonic-family instances.

Mirror of ``_fused.pyx``: same arguments, same arithmetic order, so both
backends produce the same trajectories. Used when the compiled extension
is unavailable or explicitly disabled.
"""

from __future__ import annotations

import math

MIN_MARGIN = 1e-12
MAX_CONDITION = 1e12

OK = 0
DOMAIN = 1
RETRY_FAILED = 2
NONFINITE = 3
SINGULAR = 4


def _sgn(v, eps):
    if eps > 0.0:
        return v / (abs(v) + eps)
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


def _sigp(v, a):
    if v > 0.0:
        return v**a
    if v < 0.0:
        return -((-v) ** a)
    return 0.0


def _cholesky_solve(H, rhs, n):
    """Solve ``H u = rhs`` for SPD ``H`` (row-major list). Returns None if not SPD / ill-conditioned."""
    L = [0.0] * (n * n)
    dmin = math.inf
    dmax = 0.0
    for j in range(n):
        s = H[j * n + j]
        for k in range(j):
            s -= L[j * n + k] * L[j * n + k]
        if not s > 0.0:
            return None
        d = math.sqrt(s)
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
        return None
    y = [0.0] * n
    for i in range(n):
        s = rhs[i]
        for k in range(i):
            s -= L[i * n + k] * y[k]
        y[i] = s / L[i * n + i]
    u = [0.0] * n
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k * n + i] * u[k]
        u[i] = s / L[i * n + i]
    return u


class _Model:
    def __init__(self, N, n, weight, ref, cptr, cnormal, cbound, barrier, dist, nptr, nidx, gains, flags, sign_eps):
        self.N = N
        self.n = n
        self.weight = weight
        self.ref = ref
        self.cptr = cptr
        self.cnormal = cnormal
        self.cbound = cbound
        self.barrier = barrier
        self.dist = dist
        self.nptr = nptr
        self.nidx = nidx
        self.k0, self.k1, self.k2, self.rho1, self.rho2, self.beta = gains
        self.consensus, self.sliding, self.disturb = flags
        self.eps = sign_eps

    def margins(self, x, t, out):
        """Fill ``out[q] = g_q - sigma``; return (ok, agent) where ok means all ``sigma - g > MIN_MARGIN``."""
        n = self.n
        cptr = self.cptr
        cn = self.cnormal
        cb = self.cbound
        bar = self.barrier
        bad = -1
        for i in range(self.N):
            sigma = bar[4 * i + 2] * math.exp(-bar[4 * i + 3] * t)
            for q in range(cptr[i], cptr[i + 1]):
                wt = cb[4 * q + 3] * t
                bval = cb[4 * q] + cb[4 * q + 1] * math.sin(wt) + cb[4 * q + 2] * math.cos(wt)
                g = 0.0
                for k in range(n):
                    g += cn[q * n + k] * x[i * n + k]
                g = g - bval
                m = sigma - g
                out[q] = -m
                if not m > MIN_MARGIN and bad < 0:
                    bad = i
        return bad

    def controls(self, t, x, z, u1, u2, d):
        """Evaluate all inputs at ``(x, z, t)``. Returns (status, agent)."""
        N = self.N
        n = self.n
        ref = self.ref
        cptr = self.cptr
        cn = self.cnormal
        cb = self.cbound
        bar = self.barrier
        dist = self.dist
        nptr = self.nptr
        nidx = self.nidx
        eps = self.eps
        grad = [0.0] * n
        gtp = [0.0] * n
        H = [0.0] * (n * n)
        rhs = [0.0] * n
        for i in range(N):
            a1 = bar[4 * i]
            a2 = bar[4 * i + 1]
            a3 = bar[4 * i + 2]
            a4 = bar[4 * i + 3]
            rho = a1 * math.exp(a2 * t)
            sigma = a3 * math.exp(-a4 * t)
            rho_dot = a2 * rho
            sigma_dot = -a4 * sigma
            w2 = 2.0 * self.weight[i]
            for k in range(n):
                p = 4 * (i * n + k)
                om = ref[p + 3]
                wt = om * t
                sn = math.sin(wt)
                cs = math.cos(wt)
                r = ref[p] + ref[p + 1] * sn + ref[p + 2] * cs
                rdot = om * (ref[p + 1] * cs - ref[p + 2] * sn)
                grad[k] = w2 * (x[i * n + k] - r)
                gtp[k] = -w2 * rdot
                for l in range(n):
                    H[k * n + l] = w2 if k == l else 0.0
            for q in range(cptr[i], cptr[i + 1]):
                om = cb[4 * q + 3]
                wt = om * t
                sn = math.sin(wt)
                cs = math.cos(wt)
                bval = cb[4 * q] + cb[4 * q + 1] * sn + cb[4 * q + 2] * cs
                bdot = om * (cb[4 * q + 1] * cs - cb[4 * q + 2] * sn)
                g = 0.0
                for k in range(n):
                    g += cn[q * n + k] * x[i * n + k]
                g = g - bval
                m = sigma - g
                if not m > MIN_MARGIN:
                    return DOMAIN, i
                gap_rate = sigma_dot + bdot
                for k in range(n):
                    a_k = cn[q * n + k]
                    grad[k] += a_k / (rho * m)
                    gtp[k] += -rho_dot / (rho * rho) * a_k / m
                    gtp[k] += (0.0 - a_k * gap_rate / (m * m)) / rho
                    for l in range(n):
                        H[k * n + l] += a_k * cn[q * n + l] / (m * m) / rho
            for k in range(n):
                v = grad[k] + gtp[k]
                if self.consensus:
                    c = 0.0
                    xi = x[i * n + k]
                    for e in range(nptr[i], nptr[i + 1]):
                        c += _sgn(xi - x[nidx[e] * n + k], eps)
                    v = self.beta * c + v
                rhs[k] = v
            u = _cholesky_solve(H, rhs, n)
            if u is None:
                return SINGULAR, i
            for k in range(n):
                j = i * n + k
                u1[j] = -u[k]
                if self.sliding:
                    s = x[j] - z[j]
                    u2[j] = -self.k0 * _sgn(s, eps) - self.k1 * _sigp(s, self.rho1) - self.k2 * _sigp(s, self.rho2)
                else:
                    u2[j] = 0.0
                if self.disturb:
                    p = 4 * j
                    wt = dist[p + 3] * t
                    d[j] = dist[p] + dist[p + 1] * math.sin(wt) + dist[p + 2] * math.cos(wt)
                else:
                    d[j] = 0.0
        return OK, -1


def simulate(
    N, n, weight, ref, cptr, cnormal, cbound, barrier, dist, nptr, nidx,
    gains, flags, x0, dt, n_steps, stride, sign_eps,
    out_t, out_x, out_s, out_u1, out_u2, out_d, out_m,
):
    """Run the Euler loop, writing records into the preallocated numpy outputs.

    Returns ``(status, step, agent, records_written)``.
    """
    model = _Model(
        N, n, list(map(float, weight)), list(map(float, ref)), list(map(int, cptr)),
        list(map(float, cnormal)), list(map(float, cbound)), list(map(float, barrier)),
        list(map(float, dist)), list(map(int, nptr)), list(map(int, nidx)),
        [float(g) for g in gains], [bool(f) for f in flags], float(sign_eps),
    )
    size = N * n
    Q = cptr[N]
    x = [float(v) for v in x0]
    z = [0.0] * size
    u1 = [0.0] * size
    u2 = [0.0] * size
    d = [0.0] * size
    marg = [0.0] * Q
    scratch = [0.0] * Q
    rec = 0
    h = dt / 10.0
    for step in range(n_steps + 1):
        t = step * dt
        status, agent = model.controls(t, x, z, u1, u2, d)
        if status != OK:
            return status, step, agent, rec
        if step % stride == 0 or step == n_steps:
            model.margins(x, t, marg)
            out_t[rec] = t
            out_x[rec] = x
            out_s[rec] = [x[j] - z[j] for j in range(size)]
            out_u1[rec] = u1
            out_u2[rec] = u2
            out_d[rec] = d
            out_m[rec] = marg
            rec += 1
        if step == n_steps:
            break
        xn = [x[j] + dt * ((u1[j] + u2[j]) + d[j]) for j in range(size)]
        zn = [z[j] + dt * u1[j] for j in range(size)]
        if not all(math.isfinite(v) for v in xn):
            return NONFINITE, step, -1, rec
        if model.margins(xn, (step + 1) * dt, scratch) >= 0:
            # one retry: ten substeps of dt/10 over the same interval
            xs = x[:]
            zs = z[:]
            for sub in range(10):
                ts = t + sub * h
                if sub > 0:
                    status, agent = model.controls(ts, xs, zs, u1, u2, d)
                    if status != OK:
                        return RETRY_FAILED, step, agent, rec
                xs = [xs[j] + h * ((u1[j] + u2[j]) + d[j]) for j in range(size)]
                zs = [zs[j] + h * u1[j] for j in range(size)]
                bad = model.margins(xs, ts + h, scratch)
                if bad >= 0:
                    return RETRY_FAILED, step, bad, rec
            xn, zn = xs, zs
        x, z = xn, zn
    return OK, n_steps, -1, rec
