"""Vectorised numpy kernel: boundary evaluation and the conservative step.

This is the fallback backend, selected when the compiled extension is not
available.  It implements exactly the same contract as the Cython core:

  make_ctx(table)                 -> opaque context
  theta_from_s(ctx, s)            -> theta
  s_from_theta(ctx, theta)        -> s
  boundary(ctx, theta)            -> x, y, tx, ty, kappa
  step_conservative(ctx, s, r)    -> s2, r1p, tau

The step is the elastic billiard map: chord from the boundary point at
arclength s in the direction making sine r with the inward normal (see the
sign convention in the geometry module), returning the arrival arclength,
the sine of the reflected angle there, and the chord length.  Dissipation
is applied by callers (a fibre contraction of r), never here.

The chord is found as the second root of the signed cross-product
h(u) = v x (P(theta+u) - P(theta)) on u in (0, 2*pi), by a bracketed
bisection/Newton hybrid (the bracket guarantees convergence on convex
domains; Newton supplies the final quadratic digits).
"""

from __future__ import annotations

import numpy as np

from .tables import TWO_PI, CurveTable

NAME = "numpy"

_EDGE = 1.0 - 1e-12   # |r| at or beyond this counts as a tangential fixed point
_U_EPS = 1e-9         # initial bracket inset for the chord parameter


def make_ctx(table: CurveTable) -> CurveTable:
    return table


def _spl(coef: np.ndarray, m: int, dtheta: float, theta: np.ndarray) -> np.ndarray:
    th = np.mod(theta, TWO_PI)
    k = np.minimum((th / dtheta).astype(np.int64), m - 1)
    t = th - k * dtheta
    c = coef[k]
    return ((c[..., 0] * t + c[..., 1]) * t + c[..., 2]) * t + c[..., 3]


def _radius(ctx, theta):
    return _spl(ctx.r_coef, ctx.m, ctx.dtheta, theta)


def _radius_d1(ctx, theta):
    return _spl(ctx.r1_coef, ctx.m, ctx.dtheta, theta)


def _radius_d2(ctx, theta):
    return _spl(ctx.r2_coef, ctx.m, ctx.dtheta, theta)


def _speed(ctx, theta):
    r = _radius(ctx, theta)
    r1 = _radius_d1(ctx, theta)
    return np.sqrt(r * r + r1 * r1)


def s_from_theta(ctx, theta):
    theta = np.asarray(theta, dtype=float)
    return _spl(ctx.s_coef, ctx.m, ctx.dtheta, theta)


def theta_from_s(ctx, s):
    s = np.mod(np.asarray(s, dtype=float), ctx.perimeter)
    us = ctx.perimeter / ctx.m
    # linear init from the inverse table, then Newton on s(theta)
    theta = np.interp(s, us * np.arange(ctx.m + 1), ctx.theta_at_us)
    for _ in range(3):
        f = s_from_theta(ctx, theta) - s
        theta = theta - f / _speed(ctx, theta)
    return np.mod(theta, TWO_PI)


def _position(ctx, theta):
    r = _radius(ctx, theta)
    return r * np.cos(theta), r * np.sin(theta)


def _position_d(ctx, theta):
    r = _radius(ctx, theta)
    r1 = _radius_d1(ctx, theta)
    c, s = np.cos(theta), np.sin(theta)
    return r1 * c - r * s, r1 * s + r * c


def boundary(ctx, theta):
    """Position, unit tangent and signed curvature (negative on convex)."""
    theta = np.asarray(theta, dtype=float)
    r = _radius(ctx, theta)
    r1 = _radius_d1(ctx, theta)
    r2 = _radius_d2(ctx, theta)
    c, s = np.cos(theta), np.sin(theta)
    x, y = r * c, r * s
    dx, dy = r1 * c - r * s, r1 * s + r * c
    spd = np.sqrt(dx * dx + dy * dy)
    tx, ty = dx / spd, dy / spd
    kappa = -(r * r + 2.0 * r1 * r1 - r * r2) / spd**3
    return x, y, tx, ty, kappa


def step_conservative(ctx, s, r):
    """One elastic bounce: (s, r) -> (s2, r1p) plus the chord length tau."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta = theta_from_s(ctx, s)

    rr = _radius(ctx, theta)
    r1 = _radius_d1(ctx, theta)
    cth, sth = np.cos(theta), np.sin(theta)
    px, py = rr * cth, rr * sth
    dx, dy = r1 * cth - rr * sth, r1 * sth + rr * cth
    spd = np.sqrt(dx * dx + dy * dy)
    tx, ty = dx / spd, dy / spd
    nx, ny = -ty, tx  # inward normal (ccw orientation)

    nu = np.sqrt(np.maximum(0.0, 1.0 - r * r))
    vx = -r * tx + nu * nx
    vy = -r * ty + nu * ny

    interior = np.abs(r) < _EDGE
    theta2, tau = _chord_theta(ctx, theta, px, py, vx, vy, r, interior)

    s2 = s_from_theta(ctx, theta2)
    dx2, dy2 = _position_d(ctx, theta2)
    spd2 = np.sqrt(dx2 * dx2 + dy2 * dy2)
    r1p = -(vx * dx2 + vy * dy2) / spd2

    s2 = np.where(interior, s2, s)
    r1p = np.where(interior, r1p, np.clip(r, -1.0, 1.0))
    tau = np.where(interior, tau, 0.0)
    return s2, np.clip(r1p, -1.0, 1.0), tau


def _chord_theta(ctx, theta, px, py, vx, vy, r, active):
    """Second intersection parameter of the ray with the boundary.

    h(u) = cross(v, P(theta+u) - P(theta)) is negative just after the start
    (v x T = -nu at departure) and positive just before returning, so
    [eps, 2*pi - eps] brackets the sign change.  The initial guess comes
    from the osculating circle (exact on circles); a bracket-guarded Newton
    iteration refines it.
    """
    lo = np.full_like(theta, _U_EPS)
    hi = np.full_like(theta, TWO_PI - _U_EPS)
    u = np.clip(np.pi + 2.0 * np.arcsin(np.clip(r, -1.0, 1.0)),
                _U_EPS + 1e-6, TWO_PI - _U_EPS - 1e-6)

    def h_and_hp(uu):
        th = theta + uu
        qx, qy = _position(ctx, th)
        h = vx * (qy - py) - vy * (qx - px)
        dqx, dqy = _position_d(ctx, th)
        hp = vx * dqy - vy * dqx
        return h, hp

    for _ in range(64):
        h, hp = h_and_hp(u)
        neg = h < 0.0
        lo = np.where(neg, u, lo)
        hi = np.where(neg, hi, u)
        with np.errstate(divide="ignore", invalid="ignore"):
            un = u - h / hp
        inside = (un > lo) & (un < hi) & np.isfinite(un)
        u_next = np.where(inside, un, 0.5 * (lo + hi))
        done = np.abs(u_next - u) < 1e-14
        u = u_next
        if np.all((hi - lo) < 1e-13) or np.all(done | ~active):
            break

    th2 = np.mod(theta + u, TWO_PI)
    qx, qy = _position(ctx, th2)
    tau = np.hypot(qx - px, qy - py)
    return th2, tau
