"""Stable/unstable manifolds of saddle 2-periodic orbits and homoclinic tests.

Branches grow by fundamental-domain continuation: a short seed segment
along the eigendirection is pushed repeatedly by the second iterate of the
map (inverse iterate for stable branches), refining in the seed parameter
wherever the image spacing or turning angle degrades.  Growth stops on an
arclength/point budget or on arrival at a known sink.

Intersections between stable and unstable polylines are located with a
spatial hash over the (s/P, r) cylinder; crossings are transverse when the
tangent directions differ by more than a threshold angle, and a horseshoe
certificate requires at least one transverse crossing for each of the four
branch pairs of the saddle orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import (
    ConstantDissipation,
    PhasePoint,
    step_dissipative_many,
    step_inverse_many,
)
from .geometry import BoundaryCurve
from .orbits import (
    OrbitClassification,
    TwoPeriodicOrbit,
    classify_two_periodic,
    find_two_periodic,
    numeric_period2_matrix,
)

TRANSVERSALITY_MIN_ANGLE = 1e-3


@dataclass
class ManifoldBranch:
    parent: TwoPeriodicOrbit
    bounce_index: int           # 0 -> (s1, 0), 1 -> (s2, 0)
    kind: str                   # "Stable" | "Unstable"
    side: int                   # +1 | -1
    polyline: np.ndarray        # (n, 2) phase points
    arclength: float            # in the (s/P, r) chart
    eigen_direction: np.ndarray
    eigenvalue: float
    truncated: bool = False
    clipped: bool = False
    arrived_sink: Optional[str] = None


@dataclass
class Crossing:
    point: Tuple[float, float]
    angle: float
    stable_segment: int
    unstable_segment: int


@dataclass
class HorseshoeCertificate:
    saddle: TwoPeriodicOrbit
    crossings: List[Crossing]
    min_angle: float
    passes: bool
    pairs_with_crossing: int
    tangential_count: int


# -- local linear data --------------------------------------------------------

@dataclass
class LocalManifoldData:
    matrix: np.ndarray
    eigenvalues: Tuple[float, float]      # (stable, unstable)
    stable_direction: np.ndarray
    unstable_direction: np.ndarray
    stable_segments: Tuple[np.ndarray, np.ndarray]
    unstable_segments: Tuple[np.ndarray, np.ndarray]


def _phase_metric(curve):
    P = curve.perimeter

    def dist(a, b):
        ds = np.abs(np.mod(a[..., 0] - b[..., 0] + P / 2, P) - P / 2) / P
        return np.hypot(ds, a[..., 1] - b[..., 1])

    return dist


def local_manifolds(curve, diss, saddle: TwoPeriodicOrbit, bounce_index: int = 0,
                    delta: Optional[float] = None, corrections: int = 3) -> LocalManifoldData:
    """Eigendata of Df^2 at a saddle bounce plus refined local segments.

    The local segments are obtained by seeding along the eigendirections
    closer to the fixed point and transporting back out with the dynamics
    (`corrections` double-steps), which kills the linearisation error.
    """
    cls = classify_two_periodic(saddle, diss.value) if isinstance(diss, ConstantDissipation) else None
    M = numeric_period2_matrix(curve, diss, saddle)
    evals, evecs = np.linalg.eig(M)
    if np.iscomplexobj(evals) and np.max(np.abs(evals.imag)) > 1e-9:
        raise ValueError("orbit is not a saddle (complex eigenvalues)")
    evals = evals.real
    evecs = evecs.real
    order = np.argsort(np.abs(evals))
    mu_s, mu_u = float(evals[order[0]]), float(evals[order[1]])
    if not (abs(mu_s) < 1.0 < abs(mu_u)):
        raise ValueError(f"orbit is not a saddle: |mu| = {abs(mu_s):.3g}, {abs(mu_u):.3g}")
    v_s = evecs[:, order[0]] / np.hypot(*evecs[:, order[0]])
    v_u = evecs[:, order[1]] / np.hypot(*evecs[:, order[1]])

    P = curve.perimeter
    if delta is None:
        delta = 1e-3 * P
    p0 = np.array([saddle.s1, 0.0]) if bounce_index == 0 else np.array([saddle.s2, 0.0])

    def transported(direction, eigenvalue, forward, n_pts=9):
        ts = np.linspace(-delta, delta, n_pts)
        shrink = abs(eigenvalue) ** (-corrections) if forward else abs(eigenvalue) ** (corrections)
        seeds = p0[None, :] + (ts * shrink)[:, None] * direction[None, :]
        s, r = seeds[:, 0].copy(), seeds[:, 1].copy()
        for _ in range(2 * corrections):
            if forward:
                s, r, _, _ = step_dissipative_many(curve, diss, s, r)
            else:
                s, r, ok = step_inverse_many(curve, diss, s, r)
        return np.column_stack([s, r])

    seg_u = transported(v_u, mu_u, forward=True)
    seg_s = transported(v_s, mu_s, forward=False)
    half = len(seg_u) // 2
    return LocalManifoldData(
        matrix=M,
        eigenvalues=(mu_s, mu_u),
        stable_direction=v_s,
        unstable_direction=v_u,
        stable_segments=(seg_s[half:], seg_s[: half + 1][::-1]),
        unstable_segments=(seg_u[half:], seg_u[: half + 1][::-1]),
    )


# -- branch growth ------------------------------------------------------------

def _grow_branch(curve, diss, saddle, bounce_index, side, kind,
                 target_arclength, max_points, sinks,
                 spacing=1e-3, max_turn=0.1, seed_eps=1e-7):
    """Fundamental-domain continuation of one branch.

    Points are indexed by a seed parameter t: the point at (t, generation g)
    is f^{2g} applied to p0 + t * eigendirection.  Refinement bisects in t
    at fixed g, so image-space spacing and turning control the resolution.
    """
    local = local_manifolds(curve, diss, saddle, bounce_index)
    P = curve.perimeter
    diag_metric = _phase_metric(curve)
    forward = kind == "Unstable"
    direction = local.unstable_direction if forward else local.stable_direction
    mu = local.eigenvalues[1] if forward else 1.0 / local.eigenvalues[0]
    mu_abs = abs(mu)
    p0 = np.array([saddle.s1, 0.0]) if bounce_index == 0 else np.array([saddle.s2, 0.0])

    def evaluate(ts, gen):
        seeds = p0[None, :] + (side * ts)[:, None] * direction[None, :]
        s, r = seeds[:, 0].copy(), seeds[:, 1].copy()
        clip = np.zeros(s.shape, dtype=bool)
        for _ in range(2 * gen):
            if forward:
                s, r, _, _ = step_dissipative_many(curve, diss, s, r)
            else:
                s, r, ok = step_inverse_many(curve, diss, s, r)
                clip |= ~ok
                r = np.clip(r, -(1 - 1e-6), 1 - 1e-6)
        return np.column_stack([s, r]), clip

    eps = seed_eps * P
    ts = np.geomspace(eps, eps * mu_abs, 12)
    pts, _ = evaluate(ts, 0)
    poly = [pts[k] for k in range(len(ts))]
    total = 0.0
    truncated = clipped = False
    arrived = None

    gen = 0
    sink_hits = 0
    while total < target_arclength and len(poly) < max_points:
        gen += 1
        cur_ts = ts.copy()
        pts, clip = evaluate(cur_ts, gen)
        # adaptive refinement in the seed parameter
        for _ in range(24):
            a = pts[:-1]; b = pts[1:]
            gap = diag_metric(a, b)
            turn = np.zeros(len(pts) - 1)
            if len(pts) > 2:
                d1 = np.diff(pts, axis=0)
                d1[:, 0] = np.mod(d1[:, 0] + P / 2, P) - P / 2
                d1n = d1 / np.maximum(np.hypot(d1[:, 0] / P, d1[:, 1]), 1e-300)[:, None] / [P, 1.0]
                cosang = np.clip(np.sum(d1n[:-1] * d1n[1:], axis=1)
                                 / np.maximum(np.hypot(*d1n[:-1].T) * np.hypot(*d1n[1:].T), 1e-300), -1, 1)
                turn[1:] = np.arccos(cosang)
            need = (gap > spacing) | (turn > max_turn)
            if not need.any() or len(cur_ts) > 4000:
                break
            new_ts = np.sqrt(cur_ts[:-1][need] * cur_ts[1:][need])  # geometric midpoints
            cur_ts = np.sort(np.concatenate([cur_ts, new_ts]))
            pts, clip = evaluate(cur_ts, gen)
        if clip.any():
            clipped = True
            keep = ~clip
            if keep.sum() < 2:
                break
            pts = pts[keep]
        seg = diag_metric(pts[:-1], pts[1:])
        total += float(seg.sum())
        poly.extend(pts.tolist())
        ts = cur_ts

        # sink arrival: the most recent points hug a known sink
        if sinks:
            tail = np.asarray(poly[-min(50, len(pts)):])
            dmin = None
            for name, q in sinks.items():
                d = diag_metric(tail, np.asarray(q)[None, :])
                if dmin is None or d.max() < dmin[1]:
                    dmin = (name, float(d.max()))
            if dmin and dmin[1] < 1e-4:
                sink_hits += 1
                if sink_hits >= 1:
                    arrived = dmin[0]
                    break
        if gen > 400:
            truncated = True
            break
    if len(poly) >= max_points or total >= target_arclength:
        truncated = truncated or (arrived is None)

    return ManifoldBranch(
        parent=saddle, bounce_index=bounce_index, kind=kind, side=side,
        polyline=np.asarray(poly), arclength=total,
        eigen_direction=direction, eigenvalue=mu if forward else local.eigenvalues[0],
        truncated=truncated, clipped=clipped, arrived_sink=arrived,
    )


def _sink_points(curve, diss) -> Dict[str, np.ndarray]:
    """Phase points of all sink 2-periodic orbits (for arrival detection)."""
    out = {}
    lam = diss.value if isinstance(diss, ConstantDissipation) else 0.5
    for k, orb in enumerate(find_two_periodic(curve, 48)):
        if orb.length_critical_type == "degenerate":
            continue
        cls = classify_two_periodic(orb, lam)
        if cls.orbit_type == "Sink":
            out[f"E{k}a"] = np.array([orb.s1, 0.0])
            out[f"E{k}b"] = np.array([orb.s2, 0.0])
    return out


def grow_unstable(curve, diss, saddle: TwoPeriodicOrbit, target_arclength: float = 20.0,
                  max_points: int = 200_000, bounce_index: int = 0,
                  sinks: Optional[dict] = None) -> Tuple[ManifoldBranch, ManifoldBranch]:
    """Both unstable branches of one bounce of a saddle orbit."""
    if sinks is None:
        sinks = _sink_points(curve, diss)
    return tuple(
        _grow_branch(curve, diss, saddle, bounce_index, side, "Unstable",
                     target_arclength, max_points, sinks)
        for side in (+1, -1)
    )


def grow_stable(curve, diss, saddle: TwoPeriodicOrbit, target_arclength: float = 20.0,
                max_points: int = 200_000, bounce_index: int = 0) -> Tuple[ManifoldBranch, ManifoldBranch]:
    """Both stable branches of one bounce (backward dynamics, clipped at |r| -> 1)."""
    return tuple(
        _grow_branch(curve, diss, saddle, bounce_index, side, "Stable",
                     target_arclength, max_points, sinks={})
        for side in (+1, -1)
    )


# -- intersections ------------------------------------------------------------

def _segment_intersection(p1, p2, q1, q2):
    """Intersection point of two segments, or None."""
    d1 = p2 - p1
    d2 = q2 - q1
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-300:
        return None
    t = ((q1[0] - p1[0]) * d2[1] - (q1[1] - p1[1]) * d2[0]) / denom
    u = ((q1[0] - p1[0]) * d1[1] - (q1[1] - p1[1]) * d1[0]) / denom
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return p1 + t * d1
    return None


def _normalized_segments(branch: ManifoldBranch, P: float):
    """Segments in the (s/P mod 1, r) chart, duplicated across the seam."""
    pts = branch.polyline.copy()
    x = np.mod(pts[:, 0], P) / P
    segs = []
    for k in range(len(pts) - 1):
        a = np.array([x[k], pts[k, 1]])
        b = np.array([x[k + 1], pts[k + 1, 1]])
        if abs(b[0] - a[0]) > 0.5:  # seam crossing: shift one endpoint
            if b[0] > a[0]:
                b = b - [1.0, 0.0]
            else:
                b = b + [1.0, 0.0]
        segs.append((a, b, k))
        segs.append((a + [1.0, 0.0], b + [1.0, 0.0], k))
    return segs


def homoclinic_intersections(stable, unstable, curve: Optional[BoundaryCurve] = None,
                             min_angle: float = TRANSVERSALITY_MIN_ANGLE) -> HorseshoeCertificate:
    """Transverse crossings between stable and unstable branch families.

    Accepts single branches or lists; the certificate passes when every
    (stable, unstable) pair contributes at least one crossing with angle
    above the threshold.  An empty crossing list is a valid negative.
    """
    stables = [stable] if isinstance(stable, ManifoldBranch) else list(stable)
    unstables = [unstable] if isinstance(unstable, ManifoldBranch) else list(unstable)
    P = curve.perimeter if curve is not None else _infer_period(stables + unstables)
    saddle = stables[0].parent

    crossings: List[Crossing] = []
    tangential = 0
    pairs_hit = 0
    for sb in stables:
        for ub in unstables:
            pair_found = False
            ss = _normalized_segments(sb, P)
            us = _normalized_segments(ub, P)
            cell = 0.02
            buckets: Dict[tuple, list] = {}
            for a, b, k in us:
                for key in _bucket_keys(a, b, cell):
                    buckets.setdefault(key, []).append((a, b, k))
            for a, b, k in ss:
                cand = []
                for key in _bucket_keys(a, b, cell):
                    cand += buckets.get(key, [])
                for (qa, qb, j) in cand:
                    pt = _segment_intersection(a, b, qa, qb)
                    if pt is None:
                        continue
                    ds = b - a
                    du = qb - qa
                    na, nb = np.hypot(*ds), np.hypot(*du)
                    if na < 1e-300 or nb < 1e-300:
                        continue
                    cosang = abs(float(ds @ du) / (na * nb))
                    ang = math.acos(min(1.0, cosang))
                    if ang <= min_angle:
                        tangential += 1
                        continue
                    pt_mod = (float(np.mod(pt[0], 1.0)), float(pt[1]))
                    if any(
                        abs(c.point[0] - pt_mod[0]) < 1e-9 and abs(c.point[1] - pt_mod[1]) < 1e-9
                        for c in crossings
                    ):
                        continue
                    crossings.append(Crossing(pt_mod, ang, k, j))
                    pair_found = True
            pairs_hit += int(pair_found)
    n_pairs = len(stables) * len(unstables)
    return HorseshoeCertificate(
        saddle=saddle,
        crossings=crossings,
        min_angle=min((c.angle for c in crossings), default=math.inf),
        passes=(pairs_hit == n_pairs and n_pairs > 0),
        pairs_with_crossing=pairs_hit,
        tangential_count=tangential,
    )


def _bucket_keys(a, b, cell):
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    i0, j0 = int(lo[0] // cell), int(lo[1] // cell)
    i1, j1 = int(hi[0] // cell), int(hi[1] // cell)
    return [(i, j) for i in range(i0, i1 + 1) for j in range(j0, j1 + 1)]


def _infer_period(branches) -> float:
    mx = max(float(np.max(b.polyline[:, 0])) for b in branches)
    return max(mx, 1.0)


# -- Hausdorff ----------------------------------------------------------------

def hausdorff_distance(set_a: np.ndarray, set_b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between point sets (plain Euclidean)."""
    a = np.atleast_2d(np.asarray(set_a, dtype=float))
    b = np.atleast_2d(np.asarray(set_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("hausdorff_distance requires nonempty sets")
    ta, tb = cKDTree(a), cKDTree(b)
    d_ab = float(np.max(tb.query(a)[0]))
    d_ba = float(np.max(ta.query(b)[0]))
    return max(d_ab, d_ba)


def directed_hausdorff(set_a: np.ndarray, set_b: np.ndarray) -> float:
    """sup_{a in A} dist(a, B)."""
    a = np.atleast_2d(np.asarray(set_a, dtype=float))
    b = np.atleast_2d(np.asarray(set_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("directed_hausdorff requires nonempty sets")
    return float(np.max(cKDTree(b).query(a)[0]))


def cylinder_points(curve, pts: np.ndarray) -> np.ndarray:
    """Embed (s, r) phase points into R^3 so s-wraparound distances are honest.

    The cylinder radius is P / (2 pi): short distances agree with the flat
    (s, r) metric to second order, while the seam wraps correctly.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    P = curve.perimeter
    ang = 2 * np.pi * pts[:, 0] / P
    rad = P / (2 * np.pi)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang), pts[:, 1]])
