"""2-periodic orbits: detection, eigenvalue classification, bifurcations.

A 2-periodic orbit is a chord meeting the boundary perpendicularly at both
ends, i.e. a critical point of the chord-length function l(s1, s2).  Its
linear type under the dissipative map is controlled entirely by

    k12 = (tau K1 + 1)(tau K2 + 1),

through the characteristic polynomial of Df_lambda^2 at the orbit:
trace = (1+lambda)^2 k12 - 2 lambda and det = lambda^2 for constant
dissipation (det = lambda1 lambda2 and trace = (1+lambda1)(1+lambda2) k12
- (lambda1+lambda2) for dissipation values lambda1, lambda2 at the two
bounces).  The case table:

    k12 > 1          saddle (0 < mu1 < lambda^2 < 1 < mu2)
    k12 = 1          parabolic (mu = {lambda^2, 1})
    0 < k12 < 1      sink; real eigenvalues for lambda < lambda_-,
                     complex of modulus lambda above, with
                     lambda_- = (1 - sqrt(1-k12)) / (1 + sqrt(1-k12))
    k12 = 0          sink, Df^2 = -lambda id
    -1 < k12 < 0     sink below lambda_bar = (1-sqrt(-k12))/(1+sqrt(-k12)),
                     parabolic at it, saddle above
    k12 <= -1        saddle (mu2 < -1)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dynamics import (
    ConstantDissipation,
    PhasePoint,
    conservative_jacobian,
    jacobian,
    jacobian_factors,
    length_gradient,
    step_dissipative_many,
)
from .geometry import BoundaryCurve

DEGENERATE_HESSIAN_TOL = 1e-10
CASE_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class TwoPeriodicOrbit:
    s1: float
    s2: float
    tau: float
    K1: float
    K2: float
    k12: float
    hessian: np.ndarray
    length_critical_type: str  # "max" | "saddle" | "degenerate"
    perpendicularity_residual: float

    def points(self):
        return PhasePoint(self.s1, 0.0), PhasePoint(self.s2, 0.0)


@dataclass(frozen=True)
class OrbitClassification:
    orbit_type: str            # "Saddle" | "Sink" | "Parabolic" | "Undetermined"
    case_label: str            # one of a..f, or "" when undetermined
    eigenvalues: tuple         # complex pair, |mu1| <= |mu2|
    moduli: tuple
    arguments: tuple
    is_complex: bool
    lambda_minus: Optional[float]
    lambda_bar: Optional[float]
    trace: float
    det: float
    scalar_multiple_flag: bool = False  # Df^2 = -lambda id (k12 = 0)


def length_hessian_entries(curve, s1, s2, tau=None):
    """Closed-form Hessian of l at a perpendicular chord: [[K1+1/t, 1/t],[1/t, K2+1/t]]."""
    if tau is None:
        pa, pb = curve.position(np.array([s1]))[0], curve.position(np.array([s2]))[0]
        tau = float(np.hypot(*(pb - pa)))
    K1 = float(curve.curvature(np.array([s1]))[0])
    K2 = float(curve.curvature(np.array([s2]))[0])
    A = np.array([[K1 + 1.0 / tau, 1.0 / tau], [1.0 / tau, K2 + 1.0 / tau]])
    return A, K1, K2, tau


def _length_grad_hess(curve, s1, s2):
    """Gradient and exact Hessian of l(s1, s2) at a general (non-critical) pair."""
    pa = curve.position(np.array([s1]))[0]
    pb = curve.position(np.array([s2]))[0]
    d = pb - pa
    tau = float(np.hypot(d[0], d[1]))
    u = d / tau
    t1 = curve.tangent(np.array([s1]))[0]
    t2 = curve.tangent(np.array([s2]))[0]
    n1 = np.array([-t1[1], t1[0]])
    n2 = np.array([-t2[1], t2[0]])
    K1 = float(curve.curvature(np.array([s1]))[0])
    K2 = float(curve.curvature(np.array([s2]))[0])
    ut1, ut2 = float(u @ t1), float(u @ t2)
    g = np.array([-ut1, ut2])
    h11 = (1.0 - ut1 * ut1) / tau + K1 * float(u @ n1)
    h22 = (1.0 - ut2 * ut2) / tau - K2 * float(u @ n2)
    h12 = (-float(t1 @ t2) + ut1 * ut2) / tau
    return g, np.array([[h11, h12], [h12, h22]]), tau


def find_two_periodic(curve: BoundaryCurve, grid_resolution: int = 64) -> List[TwoPeriodicOrbit]:
    """All perpendicular chords, by Newton on grad l seeded from a coarse grid.

    Diameters sit near the anti-diagonal s2 = s1 + P/2, so seeds sweep s1
    over the full period and s2 over a half-period window around it.
    Divergent seeds are skipped; results are deduplicated within 1e-6 P.
    """
    P = curve.perimeter
    found = []
    s1g = np.arange(grid_resolution) * (P / grid_resolution)
    offs = np.linspace(-0.25 * P, 0.25 * P, grid_resolution, endpoint=False)
    for a in s1g:
        for off in offs:
            s1, s2 = a, a + 0.5 * P + off
            ok = False
            for _ in range(40):
                g, H, tau = _length_grad_hess(curve, s1, s2)
                if not np.all(np.isfinite(g)):
                    break
                gn = float(np.hypot(g[0], g[1]))
                if gn < 1e-13:
                    ok = True
                    break
                try:
                    delta = np.linalg.solve(H, -g)
                except np.linalg.LinAlgError:
                    break
                if not np.all(np.isfinite(delta)) or np.max(np.abs(delta)) > 0.25 * P:
                    break
                s1, s2 = s1 + delta[0], s2 + delta[1]
            if not ok:
                continue
            s1m, s2m = float(np.mod(s1, P)), float(np.mod(s2, P))
            if s1m > s2m:
                s1m, s2m = s2m, s1m

            def circ(a, b):
                return abs((a - b + P / 2) % P - P / 2)

            if any(
                (circ(s1m, o.s1) < 1e-6 * P and circ(s2m, o.s2) < 1e-6 * P)
                or (circ(s1m, o.s2) < 1e-6 * P and circ(s2m, o.s1) < 1e-6 * P)
                for o in found
            ):
                continue
            g, _, tau = _length_grad_hess(curve, s1m, s2m)
            res = float(abs(g[0]) + abs(g[1]))
            if res > 1e-9:
                continue
            A, K1, K2, tau = length_hessian_entries(curve, s1m, s2m, tau)
            detA = float(np.linalg.det(A))
            if abs(detA) < DEGENERATE_HESSIAN_TOL:
                ctype = "degenerate"
            else:
                eigs = np.linalg.eigvalsh(A)
                ctype = "max" if np.all(eigs < 0.0) else "saddle"
            k12 = (tau * K1 + 1.0) * (tau * K2 + 1.0)
            found.append(
                TwoPeriodicOrbit(
                    s1=s1m, s2=s2m, tau=tau, K1=K1, K2=K2, k12=k12,
                    hessian=A, length_critical_type=ctype,
                    perpendicularity_residual=res,
                )
            )
    found.sort(key=lambda o: -o.tau)
    return found


def _classify_from_trace_det(trace, det, k12, lam, nonconstant=False):
    disc = trace * trace - 4.0 * det
    if disc >= 0.0:
        root = math.sqrt(disc)
        m1, m2 = (trace - root) / 2.0, (trace + root) / 2.0
        if abs(m1) > abs(m2):
            m1, m2 = m2, m1
        eig = (complex(m1), complex(m2))
        is_complex = False
    else:
        root = math.sqrt(-disc)
        eig = (complex(trace / 2.0, -root / 2.0), complex(trace / 2.0, root / 2.0))
        is_complex = True
    moduli = tuple(abs(m) for m in eig)
    args = tuple(abs(np.angle(m)) for m in eig)
    return eig, moduli, args, is_complex


def classify_two_periodic(orbit: TwoPeriodicOrbit, lam: float) -> OrbitClassification:
    """Exact branch of the constant-dissipation case table."""
    if not (0.0 < lam < 1.0):
        raise ValueError("lambda must lie in (0, 1)")
    k = orbit.k12
    trace = (1.0 + lam) ** 2 * k - 2.0 * lam
    det = lam * lam
    eig, moduli, args, is_complex = _classify_from_trace_det(trace, det, k, lam)

    lam_minus = lam_bar = None
    scalar_flag = False
    if abs(k - 1.0) <= CASE_BOUNDARY_TOL:
        otype, label = "Parabolic", "b"
    elif k > 1.0:
        otype, label = "Saddle", "a"
    elif abs(k) <= CASE_BOUNDARY_TOL:
        otype, label = "Sink", "d"
        scalar_flag = True
    elif k > 0.0:
        xi = math.sqrt(1.0 - k)
        lam_minus = (1.0 - xi) / (1.0 + xi)
        otype, label = "Sink", "c"
    elif k > -1.0:
        xi = math.sqrt(-k)
        lam_bar = (1.0 - xi) / (1.0 + xi)
        label = "e"
        if abs(lam - lam_bar) <= 1e-12:
            otype = "Parabolic"
        elif lam < lam_bar:
            otype = "Sink"
        else:
            otype = "Saddle"
    else:
        otype, label = "Saddle", "f"

    return OrbitClassification(
        orbit_type=otype, case_label=label, eigenvalues=eig, moduli=moduli,
        arguments=args, is_complex=is_complex, lambda_minus=lam_minus,
        lambda_bar=lam_bar, trace=trace, det=det, scalar_multiple_flag=scalar_flag,
    )


def classify_nonconstant(orbit: TwoPeriodicOrbit, lambda1: float, lambda2: float) -> OrbitClassification:
    """Non-constant dissipation: saddle iff k12 > 1 and sink iff k12 < 1, for k12 >= 0.

    For k12 < 0 no definitive dichotomy is available; eigenvalues are
    reported with case undetermined.
    """
    for v in (lambda1, lambda2):
        if not (0.0 < v < 1.0):
            raise ValueError("lambda values must lie in (0, 1)")
    k = orbit.k12
    trace = (1.0 + lambda1) * (1.0 + lambda2) * k - (lambda1 + lambda2)
    det = lambda1 * lambda2
    eig, moduli, args, is_complex = _classify_from_trace_det(trace, det, k, None, True)
    if k < -CASE_BOUNDARY_TOL:
        otype, label = "Undetermined", ""
    elif abs(k - 1.0) <= CASE_BOUNDARY_TOL:
        otype, label = "Parabolic", "b"
    elif k > 1.0:
        otype, label = "Saddle", "a"
    else:
        otype, label = "Sink", "c" if k > CASE_BOUNDARY_TOL else "d"
    return OrbitClassification(
        orbit_type=otype, case_label=label, eigenvalues=eig, moduli=moduli,
        arguments=args, is_complex=is_complex, lambda_minus=None, lambda_bar=None,
        trace=trace, det=det,
        scalar_multiple_flag=bool(abs(k) <= CASE_BOUNDARY_TOL),
    )


def length_hessian(orbit: TwoPeriodicOrbit):
    """(A, verdict): negative-definite means nondegenerate max (k12 > 1)."""
    A = orbit.hessian
    detA = float(np.linalg.det(A))
    if abs(detA) < DEGENERATE_HESSIAN_TOL:
        verdict = "degenerate"
    else:
        eigs = np.linalg.eigvalsh(A)
        verdict = "negative-definite" if np.all(eigs < 0) else "indefinite"
    return A, verdict


def numeric_period2_matrix(curve, diss, orbit: TwoPeriodicOrbit) -> np.ndarray:
    """Df_lambda^2 at the orbit from the assembled single-step Jacobians (oracle)."""
    p1, p2 = orbit.points()
    J1, _ = jacobian(curve, diss, p1)
    J2, _ = jacobian(curve, diss, p2)
    return J2 @ J1


def localize_real_complex_switch(orbit: TwoPeriodicOrbit, curve, lo=1e-6, hi=1 - 1e-6,
                                 tol=1e-10) -> float:
    """Bisect lambda for the real->complex eigenvalue switch of the numeric Df^2."""
    def disc(lam):
        M = numeric_period2_matrix(curve, ConstantDissipation(lam), orbit)
        tr, de = float(np.trace(M)), float(np.linalg.det(M))
        return tr * tr - 4.0 * de

    d_lo, d_hi = disc(lo), disc(hi)
    if d_lo * d_hi > 0:
        raise ValueError("no sign change: orbit has no real->complex switch in (0,1)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if disc(mid) * d_lo <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- ellipse-specific audits --------------------------------------------------

def _require_ellipse(curve):
    if curve.metadata.get("kind") not in ("ellipse", "circle"):
        raise ValueError("this audit is defined for ellipse (or circle) domains only")
    return curve.metadata["spec"]


def phase_to_xv(curve, s, r):
    """(x, v) representation: bounce point and outgoing unit direction."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x = curve.position(s)
    t = curve.tangent(s)
    n = np.stack([-t[..., 1], t[..., 0]], axis=-1)
    nu = np.sqrt(np.maximum(0.0, 1.0 - r * r))
    v = -r[..., None] * t + nu[..., None] * n
    return x, v


def confocal_parameter(spec, x, v):
    """Tangency parameter zeta of the orbit line within the confocal family.

    The line x + t v is tangent to x1^2/(a1^2-z) + x2^2/(a2^2-z) = 1 at the
    returned z.  Evaluated by fitting the (quadratic in z) tangency
    discriminant at three nodes; the root inside (0, a1^2) is returned, nan
    if none is (degenerate axis orbits).
    """
    a1sq, a2sq = spec.a1**2, spec.a2**2

    def F(z):
        q1, q2 = 1.0 / (a1sq - z), 1.0 / (a2sq - z)
        pq = q1 * x[..., 0] * v[..., 0] + q2 * x[..., 1] * v[..., 1]
        dq = q1 * v[..., 0] ** 2 + q2 * v[..., 1] ** 2
        xq = q1 * x[..., 0] ** 2 + q2 * x[..., 1] ** 2
        # multiply by (a1^2-z)^2 (a2^2-z)^2 to clear poles
        w = (a1sq - z) * (a2sq - z)
        return (pq * w) ** 2 - (dq * w) * ((xq - 1.0) * w)

    z0, z1, z2 = 0.0, 0.5 * a2sq, 0.5 * (a2sq + a1sq)
    f0, f1, f2 = F(z0), F(z1), F(z2)
    # quadratic through the three nodes (Lagrange -> monomial coefficients)
    denom = (z0 - z1) * (z0 - z2) * (z1 - z2)
    a = (z2 * (f1 - f0) + z1 * (f0 - f2) + z0 * (f2 - f1)) / denom
    b = (z2 * z2 * (f0 - f1) + z1 * z1 * (f2 - f0) + z0 * z0 * (f1 - f2)) / denom
    c = f0 - a * z0 * z0 - b * z0
    disc = np.maximum(b * b - 4 * a * c, 0.0)
    rts = np.stack(
        [(-b - np.sqrt(disc)) / (2 * a), (-b + np.sqrt(disc)) / (2 * a)], axis=-1
    )
    inside = (rts > 0.0) & (rts < a1sq)
    pick = np.where(inside[..., 0], rts[..., 0], np.where(inside[..., 1], rts[..., 1], np.nan))
    return pick


@dataclass
class LyapunovReport:
    L: np.ndarray
    L_pair: np.ndarray
    max_positive_increment: float
    pair_max_positive_increment: float
    steps_to_neutral: Optional[int]
    zeta: Optional[np.ndarray]
    zeta_max_positive_increment: Optional[float]


def lyapunov_audit(curve, diss, start: PhasePoint, n_steps: int,
                   with_confocal: bool = False) -> LyapunovReport:
    """Monotonicity audit of L(x, v) = Bx.v along a dissipative ellipse orbit.

    Also audits the paired function L + L о f whose neutral set is exactly
    the four 2-periodic points, and (optionally) the confocal tangency
    parameter -zeta.
    """
    spec = _require_ellipse(curve)
    B = spec.focal_matrix
    traj = np.empty((n_steps + 1, 2))
    traj[0] = (start.s, start.r)
    s = np.array([start.s]); r = np.array([start.r])
    for k in range(1, n_steps + 1):
        s, r, _, _ = step_dissipative_many(curve, diss, s, r)
        traj[k] = (s[0], r[0])
    x, v = phase_to_xv(curve, traj[:, 0], traj[:, 1])
    L = np.einsum("ij,nj,ni->n", B, x, v)
    dL = np.diff(L)
    Lp = L[:-1] + L[1:]
    dLp = np.diff(Lp)

    neutral_at = None
    pts2 = two_periodic_phase_points(spec, curve)
    d2 = np.min(
        [np.hypot(np.mod(traj[:, 0] - q[0] + curve.perimeter / 2, curve.perimeter)
                  - curve.perimeter / 2, traj[:, 1] - q[1]) for q in pts2],
        axis=0,
    )
    hits = np.nonzero(d2 < 1e-6)[0]
    if hits.size:
        neutral_at = int(hits[0])

    zeta = zmax = None
    if with_confocal:
        zeta = confocal_parameter(spec, x, v)
        good = np.isfinite(zeta[:-1]) & np.isfinite(zeta[1:])
        # -zeta decreases, i.e. zeta increases
        zmax = float(np.max(np.where(good, -(zeta[1:] - zeta[:-1]), -np.inf)))

    return LyapunovReport(
        L=L, L_pair=Lp,
        max_positive_increment=float(np.max(dL, initial=-np.inf)),
        pair_max_positive_increment=float(np.max(dLp, initial=-np.inf)),
        steps_to_neutral=neutral_at, zeta=zeta, zeta_max_positive_increment=zmax,
    )


def two_periodic_phase_points(spec, curve):
    """The four axis bounce points (s, 0) of an ellipse, majors first."""
    P = curve.perimeter
    return [
        (0.0, 0.0), (P / 2, 0.0),      # major-axis (saddle) orbit
        (P / 4, 0.0), (3 * P / 4, 0.0)  # minor-axis (sink) orbit
    ]


def converge_to_two_periodic(curve, diss, start: PhasePoint, n_max: int,
                             tol: float = 1e-6):
    """Label of the 2-periodic orbit attracting the start point, or NonConverged.

    Returns (label, steps) with label in {"E", "H", "NonConverged"}; "E" is
    the minor-axis sink, "H" the major-axis saddle.
    """
    spec = _require_ellipse(curve)
    P = curve.perimeter
    pts = two_periodic_phase_points(spec, curve)
    s = np.array([start.s]); r = np.array([start.r])

    def label_of(sv, rv):
        for idx, (qs, qr) in enumerate(pts):
            ds = abs((sv - qs + P / 2) % P - P / 2)
            if math.hypot(ds, rv - qr) < tol:
                return "H" if idx < 2 else "E"
        return None

    lab = label_of(float(s[0]), float(r[0]))
    if lab:
        return lab, 0
    for k in range(1, n_max + 1):
        s, r, _, _ = step_dissipative_many(curve, diss, s, r)
        lab = label_of(float(s[0]), float(r[0]))
        if lab:
            return lab, k
    return "NonConverged", n_max
