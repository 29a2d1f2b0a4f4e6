"""The conservative and dissipative billiard maps and their derivatives.

Phase space is the annulus A = [0, P) x [-1, 1] with coordinates (s, r):
s the arclength of the bounce point, r the sine of the oriented reflection
angle (outgoing direction v = -r T + nu n with nu = sqrt(1 - r^2) and n the
inward normal).  The conservative map f1 sends (s, r) to the next bounce
(s', r1'); the dissipative map composes it with the fibre contraction
H_lambda: (s, r) -> (s, lambda(s, r) r), so

    f_lambda(s, r) = (s', lambda(s', r1') r1').

Closed-form Jacobian (tau chord length, K/K' curvatures at the two bounces,
nu/nu' cosines of the angles):

    Df1 = [ -(tau K + nu)/nu'            tau/(nu nu')      ]
          [ tau K K' + K nu' + K' nu    -(tau K' + nu')/nu ]

with det Df1 = 1 identically; the dissipative map multiplies the second row
by (d_r lambda r1' + lambda) and adds the d_s lambda coupling, so
det Df_lambda = d_r lambda r1' + lambda (= lambda when constant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .geometry import BoundaryCurve

EDGE = 1.0 - 1e-12


@dataclass(frozen=True)
class PhasePoint:
    s: float
    r: float

    def __post_init__(self):
        if abs(self.r) > 1.0 + 1e-15:
            raise ValueError(f"|r| <= 1 required, got {self.r}")

    @property
    def phi(self) -> float:
        return math.asin(max(-1.0, min(1.0, self.r)))

    @property
    def nu(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.r * self.r))


# -- dissipation profiles -----------------------------------------------------

class ConstantDissipation:
    """lambda(s, r) = value, value in (0, 1)."""

    kind = "constant"

    def __init__(self, value: float):
        if not (0.0 < value < 1.0):
            raise ValueError("constant dissipation must lie in (0, 1)")
        self.value = float(value)

    def __call__(self, s, r):
        return np.broadcast_to(self.value, np.broadcast(np.asarray(s), np.asarray(r)).shape).copy()

    def d_s(self, s, r):
        return np.zeros(np.broadcast(np.asarray(s), np.asarray(r)).shape)

    def d_r(self, s, r):
        return np.zeros(np.broadcast(np.asarray(s), np.asarray(r)).shape)

    @property
    def sup(self) -> float:
        return self.value

    def __repr__(self):
        return f"ConstantDissipation({self.value})"


class VariableDissipation:
    """lambda(s, r) given by a callable, derivatives analytic or by central differences."""

    kind = "variable"
    _FD_STEP = 1e-6

    def __init__(self, func: Callable, d_s: Optional[Callable] = None,
                 d_r: Optional[Callable] = None, sup: float = 1.0, label: str = ""):
        self.func = func
        self._d_s = d_s
        self._d_r = d_r
        self.sup = float(sup)
        self.label = label

    def __call__(self, s, r):
        return np.asarray(self.func(np.asarray(s, dtype=float), np.asarray(r, dtype=float)), dtype=float)

    def d_s(self, s, r):
        if self._d_s is not None:
            return np.asarray(self._d_s(np.asarray(s, float), np.asarray(r, float)), dtype=float)
        h = self._FD_STEP
        return (self(np.asarray(s) + h, r) - self(np.asarray(s) - h, r)) / (2 * h)

    def d_r(self, s, r):
        if self._d_r is not None:
            return np.asarray(self._d_r(np.asarray(s, float), np.asarray(r, float)), dtype=float)
        h = self._FD_STEP
        return (self(s, np.asarray(r) + h) - self(s, np.asarray(r) - h)) / (2 * h)

    def fd_richardson_gap(self, s, r) -> float:
        """Disagreement between h and h/2 central differences (derivative sanity)."""
        h = self._FD_STEP
        g1 = (self(s, np.asarray(r) + h) - self(s, np.asarray(r) - h)) / (2 * h)
        g2 = (self(s, np.asarray(r) + h / 2) - self(s, np.asarray(r) - h / 2)) / h
        return float(np.max(np.abs(g1 - g2)))

    def __repr__(self):
        return f"VariableDissipation({self.label or self.func!r})"


def dissipation_from_spec(spec) -> "ConstantDissipation | VariableDissipation":
    """Build a profile from a config value: a number, or a parameter table."""
    if isinstance(spec, (int, float)):
        return ConstantDissipation(float(spec))
    if isinstance(spec, (ConstantDissipation, VariableDissipation)):
        return spec
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return ConstantDissipation(float(spec["value"]))
    if kind == "variable":
        base = float(spec.get("base", 0.8))
        amp = float(spec.get("s_amplitude", 0.0))
        phase = float(spec.get("s_phase", 0.0))
        cr = float(spec.get("r_coefficient", 0.0))
        period = float(spec.get("period", 1.0))
        w = 2.0 * math.pi / period

        def lam(s, r):
            return base + amp * np.sin(w * s + phase) + cr * np.asarray(r)

        def dls(s, r):
            return amp * w * np.cos(w * np.asarray(s) + phase) * np.ones_like(np.asarray(r, dtype=float))

        def dlr(s, r):
            return cr * np.ones(np.broadcast(np.asarray(s), np.asarray(r)).shape)

        return VariableDissipation(lam, dls, dlr, sup=base + abs(amp) + abs(cr),
                                   label=f"{base}+{amp}*sin+{cr}*r")
    raise ValueError(f"unknown dissipation kind {kind!r}")


# -- stepping -----------------------------------------------------------------

def step_conservative_many(curve: BoundaryCurve, s, r, backend=None):
    """Vectorised elastic bounce; returns (s2, r1p, tau)."""
    backend = backend or _kernels.active_backend()
    s = np.atleast_1d(np.asarray(s, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return backend.step_conservative(curve._ctx(backend), s, r)


def step_dissipative_many(curve, diss, s, r, backend=None):
    """Vectorised dissipative step; returns (s2, r2, tau, r1p)."""
    s2, r1p, tau = step_conservative_many(curve, s, r, backend=backend)
    lam = diss(s2, r1p)
    return s2, lam * r1p, tau, r1p


def inverse_contraction_many(curve, diss, s, r):
    """Invert the fibre map rho -> lambda(s, rho) rho at fixed s.

    Valid because d_rho(lambda rho) = d_r lambda rho + lambda > 0 on valid
    profiles.  Returns (rho, ok); out-of-image points get ok = False.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if isinstance(diss, ConstantDissipation):
        rho = r / diss.value
        ok = np.abs(rho) <= EDGE
        return np.clip(rho, -1.0, 1.0), ok
    lo = np.full_like(r, -1.0)
    hi = np.ones_like(r)
    g_hi = diss(s, hi) * hi - r
    g_lo = diss(s, lo) * lo - r
    ok = (g_lo <= 0.0) & (g_hi >= 0.0)
    rho = np.zeros_like(r)
    for _ in range(80):
        g = diss(s, rho) * rho - r
        neg = g < 0.0
        lo = np.where(neg, rho, lo)
        hi = np.where(neg, hi, rho)
        rho = 0.5 * (lo + hi)
    return rho, ok & (np.abs(rho) <= EDGE)


def step_inverse_many(curve, diss, s, r, backend=None):
    """Vectorised inverse of the dissipative step; returns (s0, r0, ok).

    Uses time reversal: f1^{-1} = I . f1 . I with I(s, r) = (s, -r), after
    undoing the fibre contraction.  Points outside the image annulus are
    flagged, not thrown.
    """
    rho, ok = inverse_contraction_many(curve, diss, s, r)
    s0, r0m, _ = step_conservative_many(curve, np.atleast_1d(np.asarray(s, float)), -rho,
                                        backend=backend)
    return s0, -r0m, ok


def step_conservative(curve: BoundaryCurve, p: PhasePoint) -> PhasePoint:
    """One elastic bounce; tangential points (|r| = 1) are fixed."""
    if abs(p.r) >= EDGE:
        return p
    s2, r1p, _ = step_conservative_many(curve, [p.s], [p.r])
    return PhasePoint(float(s2[0]), float(r1p[0]))


def step_dissipative(curve, diss, p: PhasePoint) -> PhasePoint:
    if abs(p.r) >= EDGE:
        q = step_conservative(curve, p)
        lam = float(np.asarray(diss(q.s, q.r)).reshape(-1)[0])
        return PhasePoint(q.s, lam * q.r)
    s2, r2, _, _ = step_dissipative_many(curve, diss, [p.s], [p.r])
    return PhasePoint(float(s2[0]), float(r2[0]))


class OutOfImageError(ValueError):
    """Raised when inverting a point outside the image of the dissipative map."""


def step_inverse(curve, diss, p: PhasePoint) -> PhasePoint:
    s0, r0, ok = step_inverse_many(curve, diss, [p.s], [p.r])
    if not bool(ok[0]):
        raise OutOfImageError(
            f"(s={p.s}, r={p.r}) is outside the image annulus; no preimage"
        )
    return PhasePoint(float(s0[0]), float(r0[0]))


# -- Jacobians ----------------------------------------------------------------

@dataclass(frozen=True)
class JacobianFactors:
    tau: float
    K: float
    K_next: float
    nu: float
    nu_next: float
    s_next: float
    r1p: float


def jacobian_factors(curve, p: PhasePoint) -> JacobianFactors:
    s2, r1p, tau = step_conservative_many(curve, [p.s], [p.r])
    K = float(curve.curvature(np.array([p.s]))[0])
    K2 = float(curve.curvature(s2)[0])
    nu2 = math.sqrt(max(0.0, 1.0 - float(r1p[0]) ** 2))
    return JacobianFactors(float(tau[0]), K, K2, p.nu, nu2, float(s2[0]), float(r1p[0]))


def conservative_jacobian(fac: JacobianFactors) -> np.ndarray:
    tau, K, K2, nu, nu2 = fac.tau, fac.K, fac.K_next, fac.nu, fac.nu_next
    return np.array(
        [
            [-(tau * K + nu) / nu2, tau / (nu * nu2)],
            [tau * K * K2 + K * nu2 + K2 * nu, -(tau * K2 + nu2) / nu],
        ]
    )


def jacobian(curve, diss, p: PhasePoint):
    """Closed-form Df_lambda(p); returns (2x2 matrix, JacobianFactors)."""
    if abs(p.r) >= EDGE:
        raise ValueError("Jacobian requires an interior point (|r| < 1)")
    fac = jacobian_factors(curve, p)
    df1 = conservative_jacobian(fac)
    lam = float(np.asarray(diss(fac.s_next, fac.r1p)).reshape(-1)[0])
    dls = float(np.asarray(diss.d_s(fac.s_next, fac.r1p)).reshape(-1)[0])
    dlr = float(np.asarray(diss.d_r(fac.s_next, fac.r1p)).reshape(-1)[0])
    dh = np.array([[1.0, 0.0], [dls * fac.r1p, dlr * fac.r1p + lam]])
    return dh @ df1, fac


def finite_difference_jacobian(curve, diss, p: PhasePoint, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the dissipative step (test oracle)."""
    out = np.zeros((2, 2))
    for j, (ds, dr) in enumerate(((step, 0.0), (0.0, step))):
        sp, rp = p.s + ds, p.r + dr
        sm, rm = p.s - ds, p.r - dr
        s2p, r2p, _, _ = step_dissipative_many(curve, diss, [sp], [rp])
        s2m, r2m, _, _ = step_dissipative_many(curve, diss, [sm], [rm])
        dsn = float(s2p[0] - s2m[0])
        # unwrap across the perimeter seam
        if dsn > curve.perimeter / 2:
            dsn -= curve.perimeter
        elif dsn < -curve.perimeter / 2:
            dsn += curve.perimeter
        out[0, j] = dsn / (2 * step)
        out[1, j] = float(r2p[0] - r2m[0]) / (2 * step)
    return out


# -- validity and twist certificates -----------------------------------------

@dataclass(frozen=True)
class DissipationReport:
    q_min: float
    q_max: float
    lam_min: float
    lam_max: float
    passes: bool
    grid: int


def validate_dissipation(diss, curve, grid_resolution: int = 64) -> DissipationReport:
    """Check 0 < d_r lambda * r + lambda < 1 on a validation grid."""
    ss = np.linspace(0.0, curve.perimeter, grid_resolution, endpoint=False)
    rr = np.linspace(-1.0, 1.0, grid_resolution)
    S, R = np.meshgrid(ss, rr, indexing="ij")
    lam = diss(S, R)
    q = diss.d_r(S, R) * R + lam
    passes = bool(np.all(q > 0.0) and np.all(q < 1.0) and np.all(lam > 0.0) and np.all(lam < 1.0))
    return DissipationReport(
        q_min=float(q.min()), q_max=float(q.max()),
        lam_min=float(lam.min()), lam_max=float(lam.max()),
        passes=passes, grid=grid_resolution,
    )


@dataclass(frozen=True)
class TwistCertificate:
    min_upper_right_entry: float
    beta: float
    passes: bool
    proof_bound: float
    max_abs_tilt_term: float
    grid: tuple


def twist_certificate(curve, diss, grid=(200, 200), r_edge: float = 1e-4) -> TwistCertificate:
    """Lower-bound the twist tilt of the image of the vertical direction.

    Works in the perimeter-normalised chart (s/P, r).  beta is the minimal
    angle between Df_lambda * e_2 and the vertical directions over the grid,
    which includes near-boundary rows |r| up to 1 - r_edge.
    """
    ns, nr = grid
    P = curve.perimeter
    ss = np.linspace(0.0, P, ns, endpoint=False)
    rr = np.concatenate([
        np.linspace(-1.0 + r_edge, 1.0 - r_edge, nr - 2),
        [-(1.0 - r_edge), 1.0 - r_edge],
    ])
    S, R = np.meshgrid(ss, rr, indexing="ij")
    s_f, r_f = S.ravel(), R.ravel()
    s2, r1p, tau = step_conservative_many(curve, s_f, r_f)
    K2 = curve.curvature(s2)
    nu = np.sqrt(1.0 - r_f**2)
    nu2 = np.sqrt(np.maximum(1e-300, 1.0 - r1p**2))
    lam = diss(s2, r1p)
    dlr = diss.d_r(s2, r1p)

    upper_right = tau / (nu * nu2)
    w_x = upper_right / P
    w_y = -(dlr * r1p + lam) * (tau * K2 + nu2) / nu
    theta_w = np.arctan2(w_x, w_y)          # angle from the +vertical, in (0, pi)
    beta = float(np.min(np.minimum(theta_w, np.pi - theta_w)))

    tilt = np.abs(tau * K2 + nu2)
    K0 = float(np.max(np.abs(curve.curvatures)))
    proof_bound = curve.diameter_bound() * K0 + 1.0

    return TwistCertificate(
        min_upper_right_entry=float(np.min(upper_right)),
        beta=beta,
        passes=bool(np.min(upper_right) > 0.0 and beta > 0.0),
        proof_bound=proof_bound,
        max_abs_tilt_term=float(np.max(tilt)),
        grid=(ns, nr),
    )


# -- generating-function stationarity ----------------------------------------

@dataclass(frozen=True)
class ActionResidual:
    stationarity_residuals: np.ndarray
    max_residual: float
    conformality: float


def length_gradient(curve, s_a, s_b):
    """(d1, d2) of the chord length l(s_a, s_b) = |Y(s_b) - Y(s_a)|."""
    s_a = np.asarray(s_a, dtype=float)
    s_b = np.asarray(s_b, dtype=float)
    pa = curve.position(s_a)
    pb = curve.position(s_b)
    d = pb - pa
    tau = np.hypot(d[..., 0], d[..., 1])
    u = d / tau[..., None]
    ta = curve.tangent(s_a)
    tb = curve.tangent(s_b)
    d1 = -(u[..., 0] * ta[..., 0] + u[..., 1] * ta[..., 1])
    d2 = u[..., 0] * tb[..., 0] + u[..., 1] * tb[..., 1]
    return d1, d2, tau


def action_residual(curve, orbit, conformality: float = 1.0) -> ActionResidual:
    """Stationarity residuals |d1 l(S_i, S_{i+1}) + a d2 l(S_{i-1}, S_i)|.

    Zero (up to solver tolerance) along true orbits of the conservative map
    (a = 1) and of the constant-conformal model (a = lambda).
    """
    ss = np.array([p.s if isinstance(p, PhasePoint) else float(p) for p in orbit])
    if ss.size < 3:
        raise ValueError("orbit must contain at least 3 points")
    d1_fwd, _, _ = length_gradient(curve, ss[1:-1], ss[2:])
    _, d2_bwd, _ = length_gradient(curve, ss[:-2], ss[1:-1])
    res = np.abs(d1_fwd + conformality * d2_bwd)
    return ActionResidual(res, float(np.max(res)), conformality)


# -- orbit helpers ------------------------------------------------------------

def iterate_orbit(curve, diss, p: PhasePoint, n: int) -> np.ndarray:
    """(n+1, 2) array of (s, r) along the dissipative orbit from p."""
    out = np.empty((n + 1, 2))
    out[0] = (p.s, p.r)
    s = np.array([p.s])
    r = np.array([p.r])
    for k in range(1, n + 1):
        s, r, _, _ = step_dissipative_many(curve, diss, s, r)
        out[k] = (s[0], r[0])
    return out


def axial_symmetry_defect(curve, diss, s0: float, pts: np.ndarray) -> float:
    """Max commutation error of f_lambda with I(s0 + s, r) = (s0 - s, -r)."""
    P = curve.perimeter
    s, r = pts[:, 0], pts[:, 1]
    fs, fr, _, _ = step_dissipative_many(curve, diss, s, r)
    js, jr = np.mod(2 * s0 - s, P), -r
    fjs, fjr, _, _ = step_dissipative_many(curve, diss, js, jr)
    ifs, ifr = np.mod(2 * s0 - fs, P), -fr
    ds = np.abs(np.mod(fjs - ifs + P / 2, P) - P / 2)
    return float(np.max(np.hypot(ds, fjr - ifr)))
