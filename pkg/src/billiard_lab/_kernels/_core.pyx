# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel: boundary evaluation and the conservative billiard step.

Same contract as the numpy fallback (see _numpy_backend.py); scalar inner
loops run without the GIL so caller-level thread pools parallelise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport asin, cos, fabs, fmod, hypot, sin, sqrt

cnp.import_array()

NAME = "cython"

DEF TWO_PI = 6.283185307179586476925286766559
DEF U_EPS = 1e-9
DEF EDGE = 0.999999999999  # 1 - 1e-12


cdef class Ctx:
    cdef double[:, ::1] rc, r1c, r2c, sc
    cdef double[::1] theta_us
    cdef double dtheta, perim
    cdef Py_ssize_t m

    def __init__(self, table):
        self.rc = np.ascontiguousarray(table.r_coef)
        self.r1c = np.ascontiguousarray(table.r1_coef)
        self.r2c = np.ascontiguousarray(table.r2_coef)
        self.sc = np.ascontiguousarray(table.s_coef)
        self.theta_us = np.ascontiguousarray(table.theta_at_us)
        self.dtheta = table.dtheta
        self.perim = table.perimeter
        self.m = table.m


def make_ctx(table):
    return Ctx(table)


cdef inline double _spl(double[:, ::1] coef, Py_ssize_t m, double dtheta,
                        double theta) nogil:
    cdef double th = fmod(theta, TWO_PI)
    if th < 0:
        th += TWO_PI
    cdef Py_ssize_t k = <Py_ssize_t>(th / dtheta)
    if k >= m:
        k = m - 1
    cdef double t = th - k * dtheta
    return ((coef[k, 0] * t + coef[k, 1]) * t + coef[k, 2]) * t + coef[k, 3]


cdef inline double _speed(Ctx ctx, double theta) nogil:
    cdef double r = _spl(ctx.rc, ctx.m, ctx.dtheta, theta)
    cdef double r1 = _spl(ctx.r1c, ctx.m, ctx.dtheta, theta)
    return sqrt(r * r + r1 * r1)


cdef inline double _s_of_theta(Ctx ctx, double theta) nogil:
    return _spl(ctx.sc, ctx.m, ctx.dtheta, theta)


cdef inline double _theta_of_s(Ctx ctx, double s) nogil:
    cdef double sm = fmod(s, ctx.perim)
    if sm < 0:
        sm += ctx.perim
    cdef double us = ctx.perim / ctx.m
    cdef Py_ssize_t k = <Py_ssize_t>(sm / us)
    if k >= ctx.m:
        k = ctx.m - 1
    cdef double frac = (sm - k * us) / us
    cdef double theta = ctx.theta_us[k] + frac * (ctx.theta_us[k + 1] - ctx.theta_us[k])
    cdef int it
    cdef double f
    for it in range(4):
        f = _s_of_theta(ctx, theta) - sm
        theta -= f / _speed(ctx, theta)
        if fabs(f) < 1e-13 * ctx.perim:
            break
    return theta


cdef inline void _pos_and_d(Ctx ctx, double theta, double* x, double* y,
                            double* dx, double* dy) nogil:
    cdef double r = _spl(ctx.rc, ctx.m, ctx.dtheta, theta)
    cdef double r1 = _spl(ctx.r1c, ctx.m, ctx.dtheta, theta)
    cdef double c = cos(theta)
    cdef double s = sin(theta)
    x[0] = r * c
    y[0] = r * s
    dx[0] = r1 * c - r * s
    dy[0] = r1 * s + r * c


cdef inline double _chord_u(Ctx ctx, double theta, double px, double py,
                            double vx, double vy, double u0) nogil:
    """Second-root parameter of h(u) = cross(v, P(theta+u) - P(theta)).

    u0 is the caller's initial guess (previous root for coherent batches,
    osculating-circle estimate otherwise); a bracket-guarded Newton
    iteration makes convergence unconditional on convex domains.
    """
    cdef double lo = U_EPS
    cdef double hi = TWO_PI - U_EPS
    cdef double u = u0
    if u < lo + 1e-6:
        u = lo + 1e-6
    elif u > hi - 1e-6:
        u = hi - 1e-6
    cdef double h, hp, qx, qy, dqx, dqy, un
    cdef int it
    for it in range(80):
        _pos_and_d(ctx, theta + u, &qx, &qy, &dqx, &dqy)
        h = vx * (qy - py) - vy * (qx - px)
        if h < 0:
            lo = u
        else:
            hi = u
        hp = vx * dqy - vy * dqx
        if hp != 0.0:
            un = u - h / hp
            if lo < un < hi:
                if fabs(un - u) < 1e-14:
                    return un
                u = un
                continue
        if hi - lo < 1e-13:
            break
        u = 0.5 * (lo + hi)
    return u


def theta_from_s(Ctx ctx, cnp.ndarray s_in):
    cdef double[::1] s = np.ascontiguousarray(s_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = s.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = _theta_of_s(ctx, s[i])
    return out.reshape(np.asarray(s_in).shape)


def s_from_theta(Ctx ctx, cnp.ndarray th_in):
    cdef double[::1] th = np.ascontiguousarray(th_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = th.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = _s_of_theta(ctx, th[i])
    return out.reshape(np.asarray(th_in).shape)


def boundary(Ctx ctx, cnp.ndarray th_in):
    shape = np.asarray(th_in).shape
    cdef double[::1] th = np.ascontiguousarray(th_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = th.shape[0]
    x = np.empty(n); y = np.empty(n)
    tx = np.empty(n); ty = np.empty(n); kap = np.empty(n)
    cdef double[::1] xo = x, yo = y, txo = tx, tyo = ty, ko = kap
    cdef Py_ssize_t i
    cdef double r, r1, r2, c, s, dx, dy, spd
    with nogil:
        for i in range(n):
            r = _spl(ctx.rc, ctx.m, ctx.dtheta, th[i])
            r1 = _spl(ctx.r1c, ctx.m, ctx.dtheta, th[i])
            r2 = _spl(ctx.r2c, ctx.m, ctx.dtheta, th[i])
            c = cos(th[i]); s = sin(th[i])
            xo[i] = r * c; yo[i] = r * s
            dx = r1 * c - r * s; dy = r1 * s + r * c
            spd = sqrt(dx * dx + dy * dy)
            txo[i] = dx / spd; tyo[i] = dy / spd
            ko[i] = -(r * r + 2 * r1 * r1 - r * r2) / (spd * spd * spd)
    return (x.reshape(shape), y.reshape(shape), tx.reshape(shape),
            ty.reshape(shape), kap.reshape(shape))


def step_conservative(Ctx ctx, cnp.ndarray s_in, cnp.ndarray r_in):
    """Vectorised elastic bounce: returns (s2, r1p, tau)."""
    shape = np.asarray(s_in).shape
    cdef double[::1] s = np.ascontiguousarray(s_in, dtype=np.float64).ravel()
    cdef double[::1] r = np.ascontiguousarray(r_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = s.shape[0]
    s2 = np.empty(n); r1p = np.empty(n); tau = np.empty(n)
    cdef double[::1] s2o = s2, r1o = r1p, tauo = tau
    cdef Py_ssize_t i
    cdef double theta, px, py, dx, dy, spd, tx, ty, nx, ny
    cdef double nu, vx, vy, u, th2, qx, qy, dqx, dqy, spd2, rr
    cdef double u_prev = -1.0
    cdef double r_prev = 2.0
    with nogil:
        for i in range(n):
            rr = r[i]
            if fabs(rr) >= EDGE:
                s2o[i] = s[i]
                r1o[i] = 1.0 if rr > 1.0 else (-1.0 if rr < -1.0 else rr)
                tauo[i] = 0.0
                continue
            theta = _theta_of_s(ctx, s[i])
            _pos_and_d(ctx, theta, &px, &py, &dx, &dy)
            spd = sqrt(dx * dx + dy * dy)
            tx = dx / spd; ty = dy / spd
            nx = -ty; ny = tx
            nu = sqrt(1.0 - rr * rr)
            vx = -rr * tx + nu * nx
            vy = -rr * ty + nu * ny
            if u_prev > 0.0 and fabs(rr - r_prev) < 0.2:
                u = _chord_u(ctx, theta, px, py, vx, vy, u_prev)
            else:
                u = _chord_u(ctx, theta, px, py, vx, vy,
                             3.14159265358979323846 + 2.0 * asin(rr))
            u_prev = u
            r_prev = rr
            th2 = theta + u
            _pos_and_d(ctx, th2, &qx, &qy, &dqx, &dqy)
            tauo[i] = hypot(qx - px, qy - py)
            s2o[i] = _s_of_theta(ctx, th2)
            spd2 = sqrt(dqx * dqx + dqy * dqy)
            rr = -(vx * dqx + vy * dqy) / spd2
            if rr > 1.0:
                rr = 1.0
            elif rr < -1.0:
                rr = -1.0
            r1o[i] = rr
    return s2.reshape(shape), r1p.reshape(shape), tau.reshape(shape)
