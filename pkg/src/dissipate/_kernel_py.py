"""Pure-Python integration kernel.

Reference implementation of the encoded-model kernel; the compiled
``_kernel`` extension mirrors it function for function.  Works on plain
Python floats and lists, which is several times faster than numpy for the
tiny state vectors involved.
"""

import math

import numpy as np

from ._codes import (
    AUX_EX4, AUX_HOOK, AUX_LTI, IN_CONST, IN_EXP, IN_PW, IN_SIN, IN_ZERO,
    METHOD_EULER, ORDER_ITERATE, ORDER_SIGMA1_FIRST, PLANT_EX4, PLANT_HOOK,
    PLANT_ICD, PLANT_LTI, PLANT_LURE, PLANT_STATIC, RATE_EX4, RATE_IONI,
    RATE_QUAD, SMAP_LINEAR, SMAP_SAT, SMAP_TABLE, SMAP_TANH, STATUS_DIVERGED,
    STATUS_LOOP_FAILURE, STATUS_OK,
)

BACKEND = "python"

_LOOP_MAXITER = 200
_LOOP_TOL = 1e-13


def smap_eval(par, off, r):
    kind = int(par[off])
    if kind == SMAP_SAT:
        c = par[off + 1]
        return min(max(r, -c), c)
    if kind == SMAP_TANH:
        return par[off + 1] * math.tanh(r)
    if kind == SMAP_LINEAR:
        return par[off + 1] * r
    if kind == SMAP_TABLE:
        k = int(par[off + 1])
        xs = off + 2
        ys = xs + k
        if r <= par[xs]:
            return par[ys]
        if r >= par[xs + k - 1]:
            return par[ys + k - 1]
        # linear scan; tables are short
        i = 0
        while par[xs + i + 1] < r:
            i += 1
        x0 = par[xs + i]
        x1 = par[xs + i + 1]
        w = (r - x0) / (x1 - x0)
        return par[ys + i] + w * (par[ys + i + 1] - par[ys + i])
    raise ValueError(f"unknown static map kind {kind}")


def _matvec(par, off, rows, cols, v, voff, out, acc):
    # out[i] (+)= M[i, :] @ v[voff:voff+cols]
    for i in range(rows):
        s = 0.0
        base = off + i * cols
        for j in range(cols):
            s += par[base + j] * v[voff + j]
        if acc:
            out[i] += s
        else:
            out[i] = s


# -- plants -----------------------------------------------------------------

def plant_f(plant, x, u):
    kind, n, m, p, par, hook_f, _ = plant
    if kind == PLANT_LTI:
        out = [0.0] * n
        _matvec(par, 0, n, n, x, 0, out, False)
        _matvec(par, n * n, n, m, u, 0, out, True)
        return out
    if kind == PLANT_ICD:
        a = par[0]
        nb = int(par[1])
        x1 = x[0]
        poly = 0.0
        pw = x1
        x1sq = x1 * x1
        for k in range(nb):
            poly += par[2 + k] * pw
            pw *= x1sq
        psi = smap_eval(par, 2 + nb, x1)
        return [-a * x1 - psi + 2.0 * x[1] - poly + u[0], -x[1] + u[0]]
    if kind == PLANT_LURE:
        return [-par[0] * x[0] - smap_eval(par, 2, x[0]) + u[0]]
    if kind == PLANT_EX4:
        psi = smap_eval(par, 0, x[1])
        return [x[1], -x[0] * x[0] * x[0] + psi * psi + u[0]]
    if kind == PLANT_STATIC:
        return []
    if kind == PLANT_HOOK:
        return [float(v) for v in np.asarray(hook_f(np.array(x), np.array(u)), dtype=float).ravel()]
    raise ValueError(f"unknown plant kind {kind}")


def plant_h(plant, x, u):
    kind, n, m, p, par, _, hook_h = plant
    if kind == PLANT_LTI:
        out = [0.0] * p
        _matvec(par, n * n + n * m, p, n, x, 0, out, False)
        _matvec(par, n * n + n * m + p * n, p, m, u, 0, out, True)
        return out
    if kind == PLANT_ICD:
        return [x[0] - x[1]]
    if kind == PLANT_LURE:
        return [x[0] - par[1] * u[0]]
    if kind == PLANT_EX4:
        return [x[1]]
    if kind == PLANT_STATIC:
        return [smap_eval(par, 0, u[0])]
    if kind == PLANT_HOOK:
        return [float(v) for v in np.asarray(hook_h(np.array(x), np.array(u)), dtype=float).ravel()]
    raise ValueError(f"unknown plant kind {kind}")


# -- auxiliary systems ------------------------------------------------------

def aux_g(aux, z, x, u, y):
    kind, nz, par, hook_g = aux
    if nz == 0:
        return []
    if kind == AUX_LTI:
        w = list(u) + list(y)
        out = [0.0] * nz
        _matvec(par, 0, nz, nz, z, 0, out, False)
        _matvec(par, nz * nz, nz, len(w), w, 0, out, True)
        return out
    if kind == AUX_EX4:
        psi = smap_eval(par, 0, z[0])
        return [-z[0] - psi * u[0] * u[0] + y[0]]
    if kind == AUX_HOOK:
        r = hook_g(np.array(z), np.array(x), np.array(u), np.array(y))
        return [float(v) for v in np.asarray(r, dtype=float).ravel()]
    raise ValueError(f"unknown auxiliary kind {kind}")


# -- supply rates -----------------------------------------------------------

def _quad_layout(par):
    n1 = int(par[0])
    n2 = int(par[1])
    q = int(par[2])
    return n1, n2, q


def rate_deriv(rate, s, u, y, x):
    kind, ns, par, swap, _ = rate
    if ns == 0:
        return []
    if swap:
        u, y = y, u
    if kind == RATE_QUAD:
        n1, n2, q = _quad_layout(par)
        w = list(u) + list(y)
        nw = len(w)
        out = [0.0] * ns
        off = 3
        # factor 1: A1 s1 + B1 w
        if n1:
            tmp = [0.0] * n1
            _matvec(par, off, n1, n1, s, 0, tmp, False)
            _matvec(par, off + n1 * n1, n1, nw, w, 0, tmp, True)
            out[:n1] = tmp
        off += n1 * n1 + n1 * nw + q * n1 + q * nw
        if n2:
            tmp = [0.0] * n2
            _matvec(par, off, n2, n2, s, n1, tmp, False)
            _matvec(par, off + n2 * n2, n2, nw, w, 0, tmp, True)
            out[n1:] = tmp
        return out
    if kind == RATE_EX4:
        psi = smap_eval(par, 0, s[0])
        return [-s[0] - psi * u[0] * u[0] + y[0]]
    if kind == RATE_IONI:
        n, m, nphi = int(par[0]), int(par[1]), int(par[2])
        off = 5 + n * n + n * m + m * n
        out = [0.0] * nphi
        _matvec(par, off, nphi, nphi, s, 0, out, False)
        _matvec(par, off + nphi * nphi, nphi, m, u, 0, out, True)
        return out
    raise ValueError(f"unknown rate kind {kind}")


def rate_out(rate, s, u, y, x):
    kind, ns, par, swap, scale = rate
    if swap:
        u, y = y, u
    if kind == RATE_QUAD:
        n1, n2, q = _quad_layout(par)
        w = list(u) + list(y)
        nw = len(w)
        off1 = 3
        c1 = off1 + n1 * n1 + n1 * nw
        d1 = c1 + q * n1
        off2 = d1 + q * nw
        c2 = off2 + n2 * n2 + n2 * nw
        d2 = c2 + q * n2
        a = [0.0] * q
        b = [0.0] * q
        _matvec(par, c1, q, n1, s, 0, a, False)
        _matvec(par, d1, q, nw, w, 0, a, True)
        _matvec(par, c2, q, n2, s, n1, b, False)
        _matvec(par, d2, q, nw, w, 0, b, True)
        xi = 0.0
        for i in range(q):
            xi += a[i] * b[i]
        return scale * xi
    if kind == RATE_EX4:
        psi = smap_eval(par, 0, y[0])
        return scale * (y[0] * (s[0] + u[0] + psi * psi))
    if kind == RATE_IONI:
        n, m, nphi = int(par[0]), int(par[1]), int(par[2])
        delta, eps = par[3], par[4]
        a_off = 5
        b_off = a_off + n * n
        c_off = b_off + n * m
        aphi = c_off + m * n
        cphi = aphi + nphi * nphi + nphi * m
        dphi = cphi + m * nphi
        xdot = [0.0] * n
        _matvec(par, a_off, n, n, x, 0, xdot, False)
        _matvec(par, b_off, n, m, u, 0, xdot, True)
        ydot = [0.0] * m
        _matvec(par, c_off, m, n, xdot, 0, ydot, False)
        phi = [0.0] * m
        _matvec(par, cphi, m, nphi, s, 0, phi, False)
        _matvec(par, dphi, m, m, u, 0, phi, True)
        xi = 0.0
        for i in range(m):
            xi += 2.0 * ydot[i] * u[i] - delta * ydot[i] * ydot[i] - eps * phi[i] * phi[i]
        return scale * xi
    return 0.0


# -- inputs -----------------------------------------------------------------

def input_channel(kind, par, off, t):
    if kind == IN_ZERO:
        return 0.0
    if kind == IN_CONST:
        return par[off]
    if kind == IN_SIN:
        return par[off] * math.sin(par[off + 1] * t + par[off + 2])
    if kind == IN_EXP:
        return par[off] * math.exp(-par[off + 1] * t)
    if kind == IN_PW:
        dwell = par[off]
        ramp = par[off + 1]
        k = int(par[off + 2])
        v = off + 3
        j = int(math.floor(t / dwell))
        if j < 0:
            j = 0
        if j > k - 1:
            j = k - 1
        tau = t - j * dwell
        width = ramp * dwell
        if j >= 1 and width > 0.0 and tau < width:
            frac = 0.5 * (1.0 - math.cos(math.pi * tau / width))
            return par[v + j - 1] + (par[v + j] - par[v + j - 1]) * frac
        return par[v + j]
    raise ValueError(f"unknown input kind {kind}")


def input_eval(inp, t):
    kinds, offsets, par = inp
    return [input_channel(int(kinds[i]), par, int(offsets[i]), t) for i in range(len(kinds))]


def _prepare(component, idx):
    # params -> list for fast scalar indexing
    c = list(component)
    c[idx] = [float(v) for v in np.asarray(c[idx], dtype=float).ravel()]
    return tuple(c)


def _prepare_input(inp):
    kinds, offsets, par = inp
    return ([int(k) for k in kinds], [int(o) for o in offsets],
            [float(v) for v in np.asarray(par, dtype=float).ravel()])


def _diverged(state, bound):
    s = 0.0
    for v in state:
        if v != v or v in (math.inf, -math.inf):
            return True
        s += v * v
    return math.sqrt(s) > bound


# -- open loop --------------------------------------------------------------

def integrate_open(plant, aux, rate, inp, x0, z0, s0, h, nsteps, method, bound):
    """Co-integrate plant, auxiliary system and supply-rate state.

    Returns ``(X, Z, S, U, Y, XI, status, index)`` with one row per grid
    point.  Rows from a divergent index onward are NaN.
    """
    plant = _prepare(plant, 4)
    aux = _prepare(aux, 2)
    rate = _prepare(rate, 2)
    inp = _prepare_input(inp)
    n, m, p = plant[1], plant[2], plant[3]
    nz = aux[1]
    ns = rate[1]
    N = nsteps + 1
    X = np.full((N, n), np.nan)
    Z = np.full((N, nz), np.nan)
    S = np.full((N, ns), np.nan)
    U = np.full((N, m), np.nan)
    Y = np.full((N, p), np.nan)
    XI = np.full(N, np.nan)
    has_rate = rate[0] != 0

    def rhs(t, st):
        x = st[:n]
        z = st[n:n + nz]
        s = st[n + nz:]
        u = input_eval(inp, t)
        y = plant_h(plant, x, u)
        d = plant_f(plant, x, u)
        d += aux_g(aux, z, x, u, y)
        d += rate_deriv(rate, s, u, y, x)
        return d

    state = [float(v) for v in x0] + [float(v) for v in z0] + [float(v) for v in s0]
    dim = len(state)
    status, index = STATUS_OK, -1
    half = 0.5 * h
    for k in range(N):
        t = k * h
        if k > 0:
            tp = (k - 1) * h
            if method == METHOD_EULER:
                d = rhs(tp, state)
                state = [state[i] + h * d[i] for i in range(dim)]
            else:
                k1 = rhs(tp, state)
                k2 = rhs(tp + half, [state[i] + half * k1[i] for i in range(dim)])
                k3 = rhs(tp + half, [state[i] + half * k2[i] for i in range(dim)])
                k4 = rhs(tp + h, [state[i] + h * k3[i] for i in range(dim)])
                state = [state[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                         for i in range(dim)]
            if _diverged(state, bound):
                status, index = STATUS_DIVERGED, k
                break
        x = state[:n]
        z = state[n:n + nz]
        s = state[n + nz:]
        u = input_eval(inp, t)
        y = plant_h(plant, x, u)
        X[k] = x
        Z[k] = z
        S[k] = s
        U[k] = u
        Y[k] = y
        XI[k] = rate_out(rate, s, u, y, x) if has_rate else 0.0
    return X, Z, S, U, Y, XI, status, index


# -- closed loop ------------------------------------------------------------

def resolve_loop(p1, p2, x1, x2, w1, w2, sign, order):
    """Solve u1 = w1 + sign*y2, u2 = w2 + y1 at one instant.

    Returns ``(u1, y1, u2, y2)`` or ``None`` when iteration fails.
    """
    m, p = p1[2], p1[3]
    if order == ORDER_SIGMA1_FIRST:
        y1 = plant_h(p1, x1, [0.0] * m)
        u2 = [w2[i] + y1[i] for i in range(p)]
        y2 = plant_h(p2, x2, u2)
        u1 = [w1[i] + sign * y2[i] for i in range(m)]
        return u1, y1, u2, y2
    if order == ORDER_ITERATE:
        u1 = list(w1)
        for _ in range(_LOOP_MAXITER):
            y1 = plant_h(p1, x1, u1)
            u2 = [w2[i] + y1[i] for i in range(p)]
            y2 = plant_h(p2, x2, u2)
            new = [w1[i] + sign * y2[i] for i in range(m)]
            err = max((abs(new[i] - u1[i]) for i in range(m)), default=0.0)
            scale = 1.0 + max((abs(v) for v in new), default=0.0)
            u1 = new
            if err <= _LOOP_TOL * scale:
                y1 = plant_h(p1, x1, u1)
                u2 = [w2[i] + y1[i] for i in range(p)]
                y2 = plant_h(p2, x2, u2)
                return u1, y1, u2, y2
        return None
    y2 = plant_h(p2, x2, [0.0] * p)
    u1 = [w1[i] + sign * y2[i] for i in range(m)]
    y1 = plant_h(p1, x1, u1)
    u2 = [w2[i] + y1[i] for i in range(p)]
    return u1, y1, u2, y2


class _LoopFailure(Exception):
    pass


def integrate_closed(p1, p2, a1, a2, in1, in2, x10, x20, z10, z20, sign, order,
                     h, nsteps, method, bound):
    """Integrate the feedback loop of two encoded plants with auxiliaries.

    Returns ``(X1, X2, Z1, Z2, U1, Y1, U2, Y2, status, index)``.
    """
    p1 = _prepare(p1, 4)
    p2 = _prepare(p2, 4)
    a1 = _prepare(a1, 2)
    a2 = _prepare(a2, 2)
    in1 = _prepare_input(in1)
    in2 = _prepare_input(in2)
    n1, m, p = p1[1], p1[2], p1[3]
    n2 = p2[1]
    nz1, nz2 = a1[1], a2[1]
    N = nsteps + 1
    X1 = np.full((N, n1), np.nan)
    X2 = np.full((N, n2), np.nan)
    Z1 = np.full((N, nz1), np.nan)
    Z2 = np.full((N, nz2), np.nan)
    U1 = np.full((N, m), np.nan)
    Y1 = np.full((N, p), np.nan)
    U2 = np.full((N, p), np.nan)
    Y2 = np.full((N, m), np.nan)
    o1, o2, o3 = n1, n1 + n2, n1 + n2 + nz1

    def signals(t, st):
        w1 = input_eval(in1, t)
        w2 = input_eval(in2, t)
        r = resolve_loop(p1, p2, st[:o1], st[o1:o2], w1, w2, sign, order)
        if r is None:
            raise _LoopFailure
        return r

    def rhs(t, st):
        x1, x2, z1, z2 = st[:o1], st[o1:o2], st[o2:o3], st[o3:]
        u1, y1, u2, y2 = signals(t, st)
        d = plant_f(p1, x1, u1)
        d += plant_f(p2, x2, u2)
        d += aux_g(a1, z1, x1, u1, y1)
        d += aux_g(a2, z2, x2, u2, y2)
        return d

    state = ([float(v) for v in x10] + [float(v) for v in x20]
             + [float(v) for v in z10] + [float(v) for v in z20])
    dim = len(state)
    status, index = STATUS_OK, -1
    half = 0.5 * h
    for k in range(N):
        t = k * h
        try:
            if k > 0:
                tp = (k - 1) * h
                if method == METHOD_EULER:
                    d = rhs(tp, state)
                    state = [state[i] + h * d[i] for i in range(dim)]
                else:
                    k1 = rhs(tp, state)
                    k2 = rhs(tp + half, [state[i] + half * k1[i] for i in range(dim)])
                    k3 = rhs(tp + half, [state[i] + half * k2[i] for i in range(dim)])
                    k4 = rhs(tp + h, [state[i] + h * k3[i] for i in range(dim)])
                    state = [state[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                             for i in range(dim)]
                if _diverged(state, bound):
                    status, index = STATUS_DIVERGED, k
                    break
            u1, y1, u2, y2 = signals(t, state)
        except _LoopFailure:
            status, index = STATUS_LOOP_FAILURE, k
            break
        X1[k] = state[:o1]
        X2[k] = state[o1:o2]
        Z1[k] = state[o2:o3]
        Z2[k] = state[o3:]
        U1[k] = u1
        Y1[k] = y1
        U2[k] = u2
        Y2[k] = y2
    return X1, X2, Z1, Z2, U1, Y1, U2, Y2, status, index
