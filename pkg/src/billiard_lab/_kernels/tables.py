"""Numerical tables backing boundary-curve evaluation.

A convex domain is described by a polar profile R(theta) with analytic first
and second derivatives, traversed counterclockwise.  At construction we
sample R, R', R'' on a dense uniform theta grid, fit periodic cubic splines
to each (so the in-between values are accurate to ~1e-13 for smooth
profiles), and accumulate arclength with per-panel Gauss-Legendre
quadrature.  Everything downstream (both kernel backends) works off the
resulting plain-array table:

  - position(theta)   = (R cos theta, R sin theta)
  - speed(theta)      = sqrt(R^2 + R'^2)
  - curvature(theta)  = -(R^2 + 2 R'^2 - R R'') / speed^3   (negative for convex)
  - s(theta)          = cumulative arclength, inverted by Newton for theta(s)

The sign convention makes the stored curvature negative on convex domains;
the inward normal is the tangent rotated by +90 degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

TWO_PI = 2.0 * np.pi

# 7-point Gauss-Legendre on [-1, 1]; per-panel quadrature of the speed.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(7)


class PolarProfile:
    """Analytic polar profile R(theta) with two derivatives."""

    def radius(self, theta):  # pragma: no cover - interface
        raise NotImplementedError

    def radius_d1(self, theta):  # pragma: no cover - interface
        raise NotImplementedError

    def radius_d2(self, theta):  # pragma: no cover - interface
        raise NotImplementedError


class EllipseProfile(PolarProfile):
    """Centered ellipse with horizontal semi-axis a1, vertical a2."""

    def __init__(self, a1: float, a2: float):
        self.a1 = float(a1)
        self.a2 = float(a2)

    def _den(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        return self.a2**2 * c**2 + self.a1**2 * s**2

    def radius(self, theta):
        return self.a1 * self.a2 / np.sqrt(self._den(theta))

    def radius_d1(self, theta):
        d = self._den(theta)
        dp = (self.a1**2 - self.a2**2) * np.sin(2.0 * theta)
        return -0.5 * self.a1 * self.a2 * dp * d**-1.5

    def radius_d2(self, theta):
        d = self._den(theta)
        dp = (self.a1**2 - self.a2**2) * np.sin(2.0 * theta)
        dpp = 2.0 * (self.a1**2 - self.a2**2) * np.cos(2.0 * theta)
        return self.a1 * self.a2 * (0.75 * dp**2 * d**-2.5 - 0.5 * dpp * d**-1.5)


class SuperellipseProfile(PolarProfile):
    """Lame curve |x/a|^m + |y/b|^m = 1 in polar form, m even >= 4.

    Curvature vanishes exactly at the four axis points, which puts the
    conservative billiard in the no-invariant-curve regime.
    """

    def __init__(self, a: float, b: float, m: int):
        if m < 4 or m % 2 != 0:
            raise ValueError("flatness degree must be an even integer >= 4")
        self.a, self.b, self.m = float(a), float(b), int(m)

    def _h(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        return c**self.m / self.a**self.m + s**self.m / self.b**self.m

    def _h_d1(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        m = self.m
        return m * (-(c ** (m - 1)) * s / self.a**m + s ** (m - 1) * c / self.b**m)

    def _h_d2(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        m = self.m
        ta = ((m - 1) * c ** (m - 2) * s**2 - c**m) * m / self.a**m
        tb = ((m - 1) * s ** (m - 2) * c**2 - s**m) * m / self.b**m
        return ta + tb

    def radius(self, theta):
        return self._h(theta) ** (-1.0 / self.m)

    def radius_d1(self, theta):
        h = self._h(theta)
        return -(1.0 / self.m) * h ** (-1.0 / self.m - 1.0) * self._h_d1(theta)

    def radius_d2(self, theta):
        m = self.m
        h, h1, h2 = self._h(theta), self._h_d1(theta), self._h_d2(theta)
        return (1.0 / m) * (1.0 / m + 1.0) * h ** (-1.0 / m - 2.0) * h1**2 - (
            1.0 / m
        ) * h ** (-1.0 / m - 1.0) * h2


class FourierPerturbedProfile(PolarProfile):
    """Radial cosine perturbation of a base profile.

    R(theta) = base(theta) * (1 + sum_k eps_k cos(k theta + psi_k))
    """

    def __init__(self, base: PolarProfile, modes):
        self.base = base
        self.modes = [(int(k), float(eps), float(psi)) for k, eps, psi in modes]

    def _g(self, theta):
        g = np.ones_like(np.asarray(theta, dtype=float))
        for k, eps, psi in self.modes:
            g = g + eps * np.cos(k * theta + psi)
        return g

    def _g_d1(self, theta):
        g = np.zeros_like(np.asarray(theta, dtype=float))
        for k, eps, psi in self.modes:
            g = g - eps * k * np.sin(k * theta + psi)
        return g

    def _g_d2(self, theta):
        g = np.zeros_like(np.asarray(theta, dtype=float))
        for k, eps, psi in self.modes:
            g = g - eps * k * k * np.cos(k * theta + psi)
        return g

    def radius(self, theta):
        return self.base.radius(theta) * self._g(theta)

    def radius_d1(self, theta):
        return self.base.radius_d1(theta) * self._g(theta) + self.base.radius(
            theta
        ) * self._g_d1(theta)

    def radius_d2(self, theta):
        return (
            self.base.radius_d2(theta) * self._g(theta)
            + 2.0 * self.base.radius_d1(theta) * self._g_d1(theta)
            + self.base.radius(theta) * self._g_d2(theta)
        )


@dataclass(frozen=True)
class CurveTable:
    """Plain-array description of a boundary curve, shared by all backends."""

    m: int                  # number of theta panels
    dtheta: float           # panel width, 2*pi / m
    perimeter: float
    r_coef: np.ndarray      # (m, 4) cubic coefficients of R per panel
    r1_coef: np.ndarray     # (m, 4) for R'
    r2_coef: np.ndarray     # (m, 4) for R''
    s_nodes: np.ndarray     # (m + 1,) cumulative arclength at panel edges
    s_coef: np.ndarray      # (m, 4) Hermite cubic of s(theta) per panel
    theta_at_us: np.ndarray  # (m + 1,) theta at uniform arclength nodes

    def spot_check(self) -> float:
        """Max |s(theta_at_us[k]) - k*P/m|, a cheap internal consistency probe."""
        k = np.arange(1, self.m)  # endpoints are pinned exactly
        target = k * (self.perimeter / self.m)
        got = _s_from_theta_table(self, self.theta_at_us[1:-1])
        return float(np.max(np.abs(got - target)))


def _periodic_coeffs(values: np.ndarray, m: int) -> np.ndarray:
    theta_nodes = np.linspace(0.0, TWO_PI, m + 1)
    vals = np.concatenate([values, values[:1]])
    cs = CubicSpline(theta_nodes, vals, bc_type="periodic")
    # scipy stores (4, m): c[0] multiplies t^3.  Flatten to (m, 4) row-major.
    return np.ascontiguousarray(cs.c.T)


def _eval_coef(coef: np.ndarray, m: int, dtheta: float, theta) -> np.ndarray:
    th = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    k = np.minimum((th / dtheta).astype(np.int64), m - 1)
    t = th - k * dtheta
    c = coef[k]
    return ((c[..., 0] * t + c[..., 1]) * t + c[..., 2]) * t + c[..., 3]


def _s_from_theta_table(tab: CurveTable, theta) -> np.ndarray:
    """Arclength s(theta) from the per-panel Hermite cubic."""
    return _eval_coef(tab.s_coef, tab.m, tab.dtheta, theta)


def _hermite_coeffs(values: np.ndarray, derivs: np.ndarray, h: float) -> np.ndarray:
    """Per-panel cubic with prescribed endpoint values and derivatives.

    Row layout matches the spline tables: c[k] = (c3, c2, c1, c0) with the
    polynomial evaluated as ((c3 t + c2) t + c1) t + c0, t = theta - theta_k.
    """
    v0, v1 = values[:-1], values[1:]
    d0, d1 = derivs[:-1], derivs[1:]
    slope = (v1 - v0) / h
    c2 = (3.0 * slope - 2.0 * d0 - d1) / h
    c3 = (d0 + d1 - 2.0 * slope) / (h * h)
    return np.ascontiguousarray(np.column_stack([c3, c2, d0, v0]))


def build_table(profile: PolarProfile, m: int = 4096) -> CurveTable:
    """Sample a profile and assemble the evaluation table."""
    theta_nodes = np.linspace(0.0, TWO_PI, m + 1)[:-1]
    r = np.asarray(profile.radius(theta_nodes), dtype=float)
    r1 = np.asarray(profile.radius_d1(theta_nodes), dtype=float)
    r2 = np.asarray(profile.radius_d2(theta_nodes), dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("polar profile must be strictly positive")

    r_coef = _periodic_coeffs(r, m)
    r1_coef = _periodic_coeffs(r1, m)
    r2_coef = _periodic_coeffs(r2, m)

    # cumulative arclength on panel edges, Gauss-Legendre on the analytic speed
    dtheta = TWO_PI / m
    half = 0.5 * dtheta
    mids = theta_nodes + half
    seg = np.zeros(m)
    for xg, wg in zip(_GL_X, _GL_W):
        tq = mids + half * xg
        rr = np.asarray(profile.radius(tq), dtype=float)
        rr1 = np.asarray(profile.radius_d1(tq), dtype=float)
        seg += wg * np.sqrt(rr * rr + rr1 * rr1)
    seg *= half
    s_nodes = np.concatenate([[0.0], np.cumsum(seg)])
    perimeter = float(s_nodes[-1])

    # per-panel Hermite cubic of s(theta): node speeds are analytic
    speeds = np.sqrt(r * r + r1 * r1)
    speeds_ext = np.concatenate([speeds, speeds[:1]])
    s_coef = _hermite_coeffs(s_nodes, speeds_ext, dtheta)

    tab = CurveTable(
        m=m,
        dtheta=dtheta,
        perimeter=perimeter,
        r_coef=r_coef,
        r1_coef=r1_coef,
        r2_coef=r2_coef,
        s_nodes=s_nodes,
        s_coef=s_coef,
        theta_at_us=np.zeros(m + 1),
    )

    # invert s(theta) on a uniform arclength grid by Newton (init: linear interp)
    us = np.linspace(0.0, perimeter, m + 1)
    theta = np.interp(us, s_nodes, np.linspace(0.0, TWO_PI, m + 1))
    for _ in range(6):
        f = _s_from_theta_table(tab, theta) - us
        # never let the endpoint wrap: clamp into [0, 2*pi]
        spd = np.sqrt(
            _eval_coef(r_coef, m, dtheta, theta) ** 2
            + _eval_coef(r1_coef, m, dtheta, theta) ** 2
        )
        theta = np.clip(theta - f / spd, 0.0, TWO_PI)
    theta[0], theta[-1] = 0.0, TWO_PI
    tab.theta_at_us[:] = theta
    return tab
