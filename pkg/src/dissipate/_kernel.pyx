# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernel.

Mirrors ``_kernel_py`` function for function; see ``_codes`` for the
parameter layouts.  Python hooks are still honoured (through the
interpreter), catalog kinds run entirely in C.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, tanh, floor, sqrt, isfinite, fabs, M_PI

cnp.import_array()

BACKEND = "cython"

DEF SMAP_SAT = 0
DEF SMAP_TANH = 1
DEF SMAP_LINEAR = 2
DEF SMAP_TABLE = 3

DEF PLANT_LTI = 0
DEF PLANT_ICD = 1
DEF PLANT_LURE = 2
DEF PLANT_EX4 = 3
DEF PLANT_STATIC = 4
DEF PLANT_HOOK = 9

DEF AUX_LTI = 1
DEF AUX_EX4 = 2
DEF AUX_HOOK = 9

DEF RATE_NONE = 0
DEF RATE_QUAD = 1
DEF RATE_EX4 = 2
DEF RATE_IONI = 3

DEF IN_ZERO = 0
DEF IN_CONST = 1
DEF IN_SIN = 2
DEF IN_PW = 3
DEF IN_EXP = 4

DEF METHOD_EULER = 1
DEF ORDER_SIGMA1_FIRST = 0
DEF ORDER_ITERATE = 2

DEF STATUS_OK = 0
DEF STATUS_DIVERGED = 1
DEF STATUS_LOOP_FAILURE = 2

DEF LOOP_MAXITER = 200
DEF LOOP_TOL = 1e-13
DEF MAXW = 64


cdef inline double smap_eval(const double* par, int off, double r) noexcept nogil:
    cdef int kind = <int>par[off]
    cdef int k, i, xs, ys
    cdef double c, x0, x1, w
    if kind == SMAP_SAT:
        c = par[off + 1]
        if r > c:
            return c
        if r < -c:
            return -c
        return r
    if kind == SMAP_TANH:
        return par[off + 1] * tanh(r)
    if kind == SMAP_LINEAR:
        return par[off + 1] * r
    # SMAP_TABLE
    k = <int>par[off + 1]
    xs = off + 2
    ys = xs + k
    if r <= par[xs]:
        return par[ys]
    if r >= par[xs + k - 1]:
        return par[ys + k - 1]
    i = 0
    while par[xs + i + 1] < r:
        i += 1
    x0 = par[xs + i]
    x1 = par[xs + i + 1]
    w = (r - x0) / (x1 - x0)
    return par[ys + i] + w * (par[ys + i + 1] - par[ys + i])


cdef inline void matvec(const double* par, int off, int rows, int cols,
                        const double* v, double* out, bint acc) noexcept nogil:
    cdef int i, j, base
    cdef double s
    for i in range(rows):
        s = 0.0
        base = off + i * cols
        for j in range(cols):
            s += par[base + j] * v[j]
        if acc:
            out[i] += s
        else:
            out[i] = s


cdef void _copy_out(object seq, double* out, int n) except *:
    arr = np.asarray(seq, dtype=float).ravel()
    cdef int i
    if arr.shape[0] != n:
        raise ValueError(f"hook returned {arr.shape[0]} values, expected {n}")
    for i in range(n):
        out[i] = arr[i]


cdef object _as_array(const double* v, int n):
    a = np.empty(n)
    cdef int i
    for i in range(n):
        a[i] = v[i]
    return a


cdef class CPlant:
    cdef int kind, n, m, p
    cdef double[::1] par_mv
    cdef const double* par
    cdef object hook_f, hook_h

    def __init__(self, spec):
        kind, n, m, p, par, hook_f, hook_h = spec
        self.kind = kind
        self.n = n
        self.m = m
        self.p = p
        arr = np.ascontiguousarray(par, dtype=float).ravel()
        if arr.shape[0] == 0:
            arr = np.zeros(1)
        self.par_mv = arr
        self.par = &self.par_mv[0]
        self.hook_f = hook_f
        self.hook_h = hook_h

    cdef int f(self, const double* x, const double* u, double* out) except -1:
        cdef const double* par = self.par
        cdef int n = self.n, m = self.m
        cdef int nb, k
        cdef double a, x1, poly, pw, x1sq, psi
        if self.kind == PLANT_LTI:
            matvec(par, 0, n, n, x, out, False)
            matvec(par, n * n, n, m, u, out, True)
        elif self.kind == PLANT_ICD:
            a = par[0]
            nb = <int>par[1]
            x1 = x[0]
            poly = 0.0
            pw = x1
            x1sq = x1 * x1
            for k in range(nb):
                poly += par[2 + k] * pw
                pw *= x1sq
            psi = smap_eval(par, 2 + nb, x1)
            out[0] = -a * x1 - psi + 2.0 * x[1] - poly + u[0]
            out[1] = -x[1] + u[0]
        elif self.kind == PLANT_LURE:
            out[0] = -par[0] * x[0] - smap_eval(par, 2, x[0]) + u[0]
        elif self.kind == PLANT_EX4:
            psi = smap_eval(par, 0, x[1])
            out[0] = x[1]
            out[1] = -x[0] * x[0] * x[0] + psi * psi + u[0]
        elif self.kind == PLANT_STATIC:
            pass
        elif self.kind == PLANT_HOOK:
            _copy_out(self.hook_f(_as_array(x, n), _as_array(u, m)), out, n)
        else:
            raise ValueError(f"unknown plant kind {self.kind}")
        return 0

    cdef int h(self, const double* x, const double* u, double* out) except -1:
        cdef const double* par = self.par
        cdef int n = self.n, m = self.m, p = self.p
        if self.kind == PLANT_LTI:
            matvec(par, n * n + n * m, p, n, x, out, False)
            matvec(par, n * n + n * m + p * n, p, m, u, out, True)
        elif self.kind == PLANT_ICD:
            out[0] = x[0] - x[1]
        elif self.kind == PLANT_LURE:
            out[0] = x[0] - par[1] * u[0]
        elif self.kind == PLANT_EX4:
            out[0] = x[1]
        elif self.kind == PLANT_STATIC:
            out[0] = smap_eval(par, 0, u[0])
        elif self.kind == PLANT_HOOK:
            _copy_out(self.hook_h(_as_array(x, n), _as_array(u, m)), out, p)
        else:
            raise ValueError(f"unknown plant kind {self.kind}")
        return 0


cdef class CAux:
    cdef int kind, nz
    cdef double[::1] par_mv
    cdef const double* par
    cdef object hook_g

    def __init__(self, spec):
        kind, nz, par, hook_g = spec
        self.kind = kind
        self.nz = nz
        arr = np.ascontiguousarray(par, dtype=float).ravel()
        if arr.shape[0] == 0:
            arr = np.zeros(1)
        self.par_mv = arr
        self.par = &self.par_mv[0]
        self.hook_g = hook_g

    cdef int g(self, const double* z, const double* x, int n, const double* u, int m,
               const double* y, int p, double* out) except -1:
        cdef double w[MAXW]
        cdef int i, nz = self.nz
        cdef double psi
        if nz == 0:
            return 0
        if self.kind == AUX_LTI:
            for i in range(m):
                w[i] = u[i]
            for i in range(p):
                w[m + i] = y[i]
            matvec(self.par, 0, nz, nz, z, out, False)
            matvec(self.par, nz * nz, nz, m + p, w, out, True)
        elif self.kind == AUX_EX4:
            psi = smap_eval(self.par, 0, z[0])
            out[0] = -z[0] - psi * u[0] * u[0] + y[0]
        elif self.kind == AUX_HOOK:
            r = self.hook_g(_as_array(z, nz), _as_array(x, n), _as_array(u, m), _as_array(y, p))
            _copy_out(r, out, nz)
        else:
            raise ValueError(f"unknown auxiliary kind {self.kind}")
        return 0


cdef class CRate:
    cdef int kind, ns
    cdef bint swap
    cdef double scale
    cdef double[::1] par_mv
    cdef const double* par

    def __init__(self, spec):
        kind, ns, par, swap, scale = spec
        self.kind = kind
        self.ns = ns
        self.swap = swap
        self.scale = scale
        arr = np.ascontiguousarray(par, dtype=float).ravel()
        if arr.shape[0] == 0:
            arr = np.zeros(1)
        self.par_mv = arr
        self.par = &self.par_mv[0]

    cdef void deriv(self, const double* s, const double* u0, int m0, const double* y0, int p0,
                    const double* x, double* out) noexcept:
        cdef const double* par = self.par
        cdef const double* u = u0
        cdef const double* y = y0
        cdef int m = m0, p = p0
        cdef double w[MAXW]
        cdef int i, n1, n2, q, nw, off, n, mm, nphi
        cdef double psi
        if self.ns == 0:
            return
        if self.swap:
            u = y0
            y = u0
            m = p0
            p = m0
        if self.kind == RATE_QUAD:
            n1 = <int>par[0]
            n2 = <int>par[1]
            q = <int>par[2]
            nw = m + p
            for i in range(m):
                w[i] = u[i]
            for i in range(p):
                w[m + i] = y[i]
            off = 3
            if n1:
                matvec(par, off, n1, n1, s, out, False)
                matvec(par, off + n1 * n1, n1, nw, w, out, True)
            off += n1 * n1 + n1 * nw + q * n1 + q * nw
            if n2:
                matvec(par, off, n2, n2, s + n1, out + n1, False)
                matvec(par, off + n2 * n2, n2, nw, w, out + n1, True)
        elif self.kind == RATE_EX4:
            psi = smap_eval(par, 0, s[0])
            out[0] = -s[0] - psi * u[0] * u[0] + y[0]
        elif self.kind == RATE_IONI:
            n = <int>par[0]
            mm = <int>par[1]
            nphi = <int>par[2]
            off = 5 + n * n + n * mm + mm * n
            matvec(par, off, nphi, nphi, s, out, False)
            matvec(par, off + nphi * nphi, nphi, mm, u, out, True)

    cdef double out(self, const double* s, const double* u0, int m0, const double* y0, int p0,
                    const double* x) noexcept:
        cdef const double* par = self.par
        cdef const double* u = u0
        cdef const double* y = y0
        cdef int m = m0, p = p0
        cdef double w[MAXW]
        cdef double a[MAXW]
        cdef double b[MAXW]
        cdef double xdot[MAXW]
        cdef double ydot[MAXW]
        cdef double phi[MAXW]
        cdef int i, n1, n2, q, nw, c1, d1, off2, c2, d2
        cdef int n, mm, nphi, a_off, b_off, c_off, aphi, cphi, dphi
        cdef double xi, psi, delta, eps
        if self.kind == RATE_NONE:
            return 0.0
        if self.swap:
            u = y0
            y = u0
            m = p0
            p = m0
        if self.kind == RATE_QUAD:
            n1 = <int>par[0]
            n2 = <int>par[1]
            q = <int>par[2]
            nw = m + p
            for i in range(m):
                w[i] = u[i]
            for i in range(p):
                w[m + i] = y[i]
            c1 = 3 + n1 * n1 + n1 * nw
            d1 = c1 + q * n1
            off2 = d1 + q * nw
            c2 = off2 + n2 * n2 + n2 * nw
            d2 = c2 + q * n2
            matvec(par, c1, q, n1, s, a, False)
            matvec(par, d1, q, nw, w, a, True)
            matvec(par, c2, q, n2, s + n1, b, False)
            matvec(par, d2, q, nw, w, b, True)
            xi = 0.0
            for i in range(q):
                xi += a[i] * b[i]
            return self.scale * xi
        if self.kind == RATE_EX4:
            psi = smap_eval(par, 0, y[0])
            return self.scale * (y[0] * (s[0] + u[0] + psi * psi))
        if self.kind == RATE_IONI:
            n = <int>par[0]
            mm = <int>par[1]
            nphi = <int>par[2]
            delta = par[3]
            eps = par[4]
            a_off = 5
            b_off = a_off + n * n
            c_off = b_off + n * mm
            aphi = c_off + mm * n
            cphi = aphi + nphi * nphi + nphi * mm
            dphi = cphi + mm * nphi
            matvec(par, a_off, n, n, x, xdot, False)
            matvec(par, b_off, n, mm, u, xdot, True)
            matvec(par, c_off, mm, n, xdot, ydot, False)
            matvec(par, cphi, mm, nphi, s, phi, False)
            matvec(par, dphi, mm, mm, u, phi, True)
            xi = 0.0
            for i in range(mm):
                xi += 2.0 * ydot[i] * u[i] - delta * ydot[i] * ydot[i] - eps * phi[i] * phi[i]
            return self.scale * xi
        return 0.0


cdef class CInput:
    cdef int nch
    cdef long[::1] kinds
    cdef long[::1] offsets
    cdef double[::1] par_mv

    def __init__(self, spec):
        kinds, offsets, par = spec
        self.kinds = np.ascontiguousarray(kinds, dtype=np.int64)
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        arr = np.ascontiguousarray(par, dtype=float).ravel()
        if arr.shape[0] == 0:
            arr = np.zeros(1)
        self.par_mv = arr
        self.nch = self.kinds.shape[0]

    cdef void eval(self, double t, double* out) noexcept:
        cdef int i
        for i in range(self.nch):
            out[i] = input_channel(<int>self.kinds[i], &self.par_mv[0], <int>self.offsets[i], t)


cdef inline double input_channel(int kind, const double* par, int off, double t) noexcept nogil:
    cdef double dwell, ramp, tau, width, frac
    cdef int k, v, j
    if kind == IN_ZERO:
        return 0.0
    if kind == IN_CONST:
        return par[off]
    if kind == IN_SIN:
        return par[off] * sin(par[off + 1] * t + par[off + 2])
    if kind == IN_EXP:
        return par[off] * exp(-par[off + 1] * t)
    # IN_PW
    dwell = par[off]
    ramp = par[off + 1]
    k = <int>par[off + 2]
    v = off + 3
    j = <int>floor(t / dwell)
    if j < 0:
        j = 0
    if j > k - 1:
        j = k - 1
    tau = t - j * dwell
    width = ramp * dwell
    if j >= 1 and width > 0.0 and tau < width:
        frac = 0.5 * (1.0 - cos(M_PI * tau / width))
        return par[v + j - 1] + (par[v + j] - par[v + j - 1]) * frac
    return par[v + j]


cdef inline bint diverged(const double* st, int dim, double bound) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(dim):
        if not isfinite(st[i]):
            return True
        s += st[i] * st[i]
    return sqrt(s) > bound


# -- open loop --------------------------------------------------------------

cdef class _OpenSystem:
    cdef CPlant plant
    cdef CAux aux
    cdef CRate rate
    cdef CInput inp
    cdef int n, m, p, nz, ns
    cdef double u[MAXW]
    cdef double y[MAXW]

    cdef int rhs(self, double t, const double* st, double* d) except -1:
        cdef int n = self.n, nz = self.nz
        self.inp.eval(t, self.u)
        self.plant.h(st, self.u, self.y)
        self.plant.f(st, self.u, d)
        self.aux.g(st + n, st, n, self.u, self.m, self.y, self.p, d + n)
        self.rate.deriv(st + n + nz, self.u, self.m, self.y, self.p, st, d + n + nz)
        return 0


def integrate_open(plant, aux, rate, inp, x0, z0, s0, double h, int nsteps, int method, double bound):
    """Co-integrate plant, auxiliary system and supply-rate state.

    Returns ``(X, Z, S, U, Y, XI, status, index)``; see ``_kernel_py``.
    """
    cdef _OpenSystem sys = _OpenSystem()
    sys.plant = CPlant(plant)
    sys.aux = CAux(aux)
    sys.rate = CRate(rate)
    sys.inp = CInput(inp)
    sys.n = plant[1]
    sys.m = plant[2]
    sys.p = plant[3]
    sys.nz = aux[1]
    sys.ns = rate[1]
    if sys.m + sys.p > MAXW or sys.n > MAXW:
        raise ValueError("dimension too large for the compiled kernel")
    cdef int n = sys.n, m = sys.m, p = sys.p, nz = sys.nz, ns = sys.ns
    cdef int dim = n + nz + ns
    cdef int N = nsteps + 1
    cdef cnp.ndarray[cnp.double_t, ndim=2] X = np.full((N, n), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] Z = np.full((N, nz), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] S = np.full((N, ns), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] U = np.full((N, m), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] Y = np.full((N, p), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=1] XI = np.full(N, np.nan)
    buf = np.zeros((6, max(dim, 1)))
    cdef double[:, ::1] b = buf
    cdef double* st = &b[0, 0]
    cdef double* k1 = &b[1, 0]
    cdef double* k2 = &b[2, 0]
    cdef double* k3 = &b[3, 0]
    cdef double* k4 = &b[4, 0]
    cdef double* tmp = &b[5, 0]
    cdef double u[MAXW]
    cdef double y[MAXW]
    cdef int i, k, status = STATUS_OK, index = -1
    cdef double t, tp, half = 0.5 * h, h6 = h / 6.0
    cdef bint has_rate = sys.rate.kind != RATE_NONE
    x0a = np.asarray(x0, dtype=float).ravel()
    z0a = np.asarray(z0, dtype=float).ravel()
    s0a = np.asarray(s0, dtype=float).ravel()
    for i in range(n):
        st[i] = x0a[i]
    for i in range(nz):
        st[n + i] = z0a[i]
    for i in range(ns):
        st[n + nz + i] = s0a[i]
    for k in range(N):
        t = k * h
        if k > 0:
            tp = (k - 1) * h
            if method == METHOD_EULER:
                sys.rhs(tp, st, k1)
                for i in range(dim):
                    st[i] = st[i] + h * k1[i]
            else:
                sys.rhs(tp, st, k1)
                for i in range(dim):
                    tmp[i] = st[i] + half * k1[i]
                sys.rhs(tp + half, tmp, k2)
                for i in range(dim):
                    tmp[i] = st[i] + half * k2[i]
                sys.rhs(tp + half, tmp, k3)
                for i in range(dim):
                    tmp[i] = st[i] + h * k3[i]
                sys.rhs(tp + h, tmp, k4)
                for i in range(dim):
                    st[i] = st[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if diverged(st, dim, bound):
                status = STATUS_DIVERGED
                index = k
                break
        sys.inp.eval(t, u)
        sys.plant.h(st, u, y)
        for i in range(n):
            X[k, i] = st[i]
        for i in range(nz):
            Z[k, i] = st[n + i]
        for i in range(ns):
            S[k, i] = st[n + nz + i]
        for i in range(m):
            U[k, i] = u[i]
        for i in range(p):
            Y[k, i] = y[i]
        XI[k] = sys.rate.out(st + n + nz, u, m, y, p, st) if has_rate else 0.0
    return X, Z, S, U, Y, XI, status, index


# -- closed loop ------------------------------------------------------------

cdef class _ClosedSystem:
    cdef CPlant p1, p2
    cdef CAux a1, a2
    cdef CInput in1, in2
    cdef int n1, n2, m, p, nz1, nz2, order
    cdef double sign
    cdef double w1[MAXW]
    cdef double w2[MAXW]
    cdef double u1[MAXW]
    cdef double y1[MAXW]
    cdef double u2[MAXW]
    cdef double y2[MAXW]
    cdef double zero[MAXW]
    cdef double nxt[MAXW]

    cdef int signals(self, double t, const double* st) except -1:
        """Fill u1, y1, u2, y2; returns 1 when loop iteration fails."""
        cdef int i, it, m = self.m, p = self.p
        cdef const double* x1 = st
        cdef const double* x2 = st + self.n1
        cdef double err, sc, v
        self.in1.eval(t, self.w1)
        self.in2.eval(t, self.w2)
        if self.order == ORDER_SIGMA1_FIRST:
            self.p1.h(x1, self.zero, self.y1)
            for i in range(p):
                self.u2[i] = self.w2[i] + self.y1[i]
            self.p2.h(x2, self.u2, self.y2)
            for i in range(m):
                self.u1[i] = self.w1[i] + self.sign * self.y2[i]
            return 0
        if self.order == ORDER_ITERATE:
            for i in range(m):
                self.u1[i] = self.w1[i]
            for it in range(LOOP_MAXITER):
                self.p1.h(x1, self.u1, self.y1)
                for i in range(p):
                    self.u2[i] = self.w2[i] + self.y1[i]
                self.p2.h(x2, self.u2, self.y2)
                err = 0.0
                sc = 0.0
                for i in range(m):
                    v = self.w1[i] + self.sign * self.y2[i]
                    self.nxt[i] = v
                    if fabs(v - self.u1[i]) > err:
                        err = fabs(v - self.u1[i])
                    if fabs(v) > sc:
                        sc = fabs(v)
                for i in range(m):
                    self.u1[i] = self.nxt[i]
                if err <= LOOP_TOL * (1.0 + sc):
                    self.p1.h(x1, self.u1, self.y1)
                    for i in range(p):
                        self.u2[i] = self.w2[i] + self.y1[i]
                    self.p2.h(x2, self.u2, self.y2)
                    return 0
            return 1
        self.p2.h(x2, self.zero, self.y2)
        for i in range(m):
            self.u1[i] = self.w1[i] + self.sign * self.y2[i]
        self.p1.h(x1, self.u1, self.y1)
        for i in range(p):
            self.u2[i] = self.w2[i] + self.y1[i]
        return 0

    cdef int rhs(self, double t, const double* st, double* d) except -1:
        cdef int n1 = self.n1, n2 = self.n2, nz1 = self.nz1
        if self.signals(t, st):
            return 1
        self.p1.f(st, self.u1, d)
        self.p2.f(st + n1, self.u2, d + n1)
        self.a1.g(st + n1 + n2, st, n1, self.u1, self.m, self.y1, self.p, d + n1 + n2)
        self.a2.g(st + n1 + n2 + nz1, st + n1, n2, self.u2, self.p, self.y2, self.m,
                  d + n1 + n2 + nz1)
        return 0


def integrate_closed(p1, p2, a1, a2, in1, in2, x10, x20, z10, z20, double sign, int order,
                     double h, int nsteps, int method, double bound):
    """Integrate the feedback loop of two encoded plants with auxiliaries.

    Returns ``(X1, X2, Z1, Z2, U1, Y1, U2, Y2, status, index)``.
    """
    cdef _ClosedSystem sys = _ClosedSystem()
    sys.p1 = CPlant(p1)
    sys.p2 = CPlant(p2)
    sys.a1 = CAux(a1)
    sys.a2 = CAux(a2)
    sys.in1 = CInput(in1)
    sys.in2 = CInput(in2)
    sys.n1 = p1[1]
    sys.m = p1[2]
    sys.p = p1[3]
    sys.n2 = p2[1]
    sys.nz1 = a1[1]
    sys.nz2 = a2[1]
    sys.sign = sign
    sys.order = order
    cdef int i, k
    for i in range(MAXW):
        sys.zero[i] = 0.0
    if sys.m + sys.p > MAXW:
        raise ValueError("dimension too large for the compiled kernel")
    cdef int n1 = sys.n1, n2 = sys.n2, m = sys.m, p = sys.p, nz1 = sys.nz1, nz2 = sys.nz2
    cdef int dim = n1 + n2 + nz1 + nz2
    cdef int N = nsteps + 1
    cdef cnp.ndarray[cnp.double_t, ndim=2] X1 = np.full((N, n1), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] X2 = np.full((N, n2), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] Z1 = np.full((N, nz1), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] Z2 = np.full((N, nz2), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] U1 = np.full((N, m), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] Y1 = np.full((N, p), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] U2 = np.full((N, p), np.nan)
    cdef cnp.ndarray[cnp.double_t, ndim=2] Y2 = np.full((N, m), np.nan)
    buf = np.zeros((6, max(dim, 1)))
    cdef double[:, ::1] b = buf
    cdef double* st = &b[0, 0]
    cdef double* k1 = &b[1, 0]
    cdef double* k2 = &b[2, 0]
    cdef double* k3 = &b[3, 0]
    cdef double* k4 = &b[4, 0]
    cdef double* tmp = &b[5, 0]
    cdef int status = STATUS_OK, index = -1
    cdef double t, tp, half = 0.5 * h, h6 = h / 6.0
    cdef int fail = 0
    init = np.concatenate([np.asarray(v, dtype=float).ravel() for v in (x10, x20, z10, z20)])
    for i in range(dim):
        st[i] = init[i]
    for k in range(N):
        t = k * h
        if k > 0:
            tp = (k - 1) * h
            if method == METHOD_EULER:
                fail = sys.rhs(tp, st, k1)
                if not fail:
                    for i in range(dim):
                        st[i] = st[i] + h * k1[i]
            else:
                fail = sys.rhs(tp, st, k1)
                if not fail:
                    for i in range(dim):
                        tmp[i] = st[i] + half * k1[i]
                    fail = sys.rhs(tp + half, tmp, k2)
                if not fail:
                    for i in range(dim):
                        tmp[i] = st[i] + half * k2[i]
                    fail = sys.rhs(tp + half, tmp, k3)
                if not fail:
                    for i in range(dim):
                        tmp[i] = st[i] + h * k3[i]
                    fail = sys.rhs(tp + h, tmp, k4)
                if not fail:
                    for i in range(dim):
                        st[i] = st[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if fail:
                status = STATUS_LOOP_FAILURE
                index = k
                break
            if diverged(st, dim, bound):
                status = STATUS_DIVERGED
                index = k
                break
        if sys.signals(t, st):
            status = STATUS_LOOP_FAILURE
            index = k
            break
        for i in range(n1):
            X1[k, i] = st[i]
        for i in range(n2):
            X2[k, i] = st[n1 + i]
        for i in range(nz1):
            Z1[k, i] = st[n1 + n2 + i]
        for i in range(nz2):
            Z2[k, i] = st[n1 + n2 + nz1 + i]
        for i in range(m):
            U1[k, i] = sys.u1[i]
            Y2[k, i] = sys.y2[i]
        for i in range(p):
            Y1[k, i] = sys.y1[i]
            U2[k, i] = sys.u2[i]
    return X1, X2, Z1, Z2, U1, Y1, U2, Y2, status, index
