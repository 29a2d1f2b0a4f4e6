"""Convex planar domains with arclength parametrisation.

A BoundaryCurve wraps a polar profile sampled into a kernel table and
exposes position/tangent/curvature as functions of arclength s in [0, P).
Conventions used throughout the package:

  - counterclockwise traversal, inward normal n = rot90(T);
  - signed curvature stored NEGATIVE on convex boundaries;
  - perimeter kept in physical units (angular exports report s/P).

The pinched-curvature certificate checks max_s tau(s) * K(s) < -1, where
tau(s) is the length of the chord leaving Upsilon(s) along the inward
normal; equivalently, all osculating-circle centers lie inside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from ._kernels.tables import (
    CurveTable,
    EllipseProfile,
    FourierPerturbedProfile,
    PolarProfile,
    SuperellipseProfile,
    build_table,
)

FLAT_CURVATURE_TOL = 1e-6


@dataclass(frozen=True)
class EllipseSpec:
    """Semi-axes of an ellipse, major horizontal."""

    a1: float
    a2: float

    def __post_init__(self):
        if not (self.a2 > 0.0):
            raise ValueError("degenerate axes: a2 must be positive")
        if self.a1 < self.a2:
            raise ValueError("require a1 >= a2 (major axis horizontal)")

    @property
    def eccentricity(self) -> float:
        return math.sqrt(self.a1**2 - self.a2**2) / self.a1

    @property
    def focal_matrix(self) -> np.ndarray:
        """diag(1/a1^2, 1/a2^2); x.B x = 1 on the boundary."""
        return np.diag([1.0 / self.a1**2, 1.0 / self.a2**2])


@dataclass(frozen=True)
class DkCertificate:
    """Pinched-curvature certificate: passes iff max tau*K < -1."""

    max_tau_K: float
    margin: float
    passes: bool
    samples: int
    reason: str = ""


@dataclass(frozen=True)
class ChordResult:
    s_next: float
    tau: float


class BoundaryCurve:
    """Arclength-parametrised strictly convex boundary."""

    interpolation_order = 3

    def __init__(self, table: CurveTable, sample_count: int, metadata: dict):
        self.table = table
        self.sample_count = int(sample_count)
        self.metadata = dict(metadata)
        self.perimeter = table.perimeter
        self._ctx_cache: dict = {}

        ss = self.sample_grid()
        x, y, tx, ty, kappa = self._boundary(ss)
        self.positions = np.column_stack([x, y])
        self.tangents = np.column_stack([tx, ty])
        self.curvatures = kappa

        self.strongly_convex = bool(np.max(kappa) < -FLAT_CURVATURE_TOL)
        flat = int(np.sum(np.abs(kappa) < FLAT_CURVATURE_TOL))
        self.metadata.setdefault("flat_samples", flat)
        if np.max(kappa) > 1e-10:
            raise ValueError("boundary is not convex (positive curvature found)")
        self._validate()

    # -- construction-time invariants ------------------------------------
    def _validate(self):
        norms = np.hypot(self.tangents[:, 0], self.tangents[:, 1])
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise AssertionError("tangents are not unit vectors")
        ang = np.arctan2(self.tangents[:, 1], self.tangents[:, 0])
        turns = np.sum(np.mod(np.diff(np.concatenate([ang, ang[:1]])) + np.pi, 2 * np.pi) - np.pi)
        if abs(abs(turns) - 2.0 * np.pi) > 1e-6:
            raise AssertionError("tangent winding is not one full turn")

    # -- kernel plumbing ---------------------------------------------------
    def _ctx(self, backend=None):
        backend = backend or _kernels.active_backend()
        key = backend.NAME
        if key not in self._ctx_cache:
            self._ctx_cache[key] = backend.make_ctx(self.table)
        return self._ctx_cache[key]

    def _boundary(self, s, backend=None):
        backend = backend or _kernels.active_backend()
        theta = backend.theta_from_s(self._ctx(backend), np.asarray(s, dtype=float))
        return backend.boundary(self._ctx(backend), theta)

    # -- evaluation --------------------------------------------------------
    def sample_grid(self) -> np.ndarray:
        return np.arange(self.sample_count) * (self.perimeter / self.sample_count)

    def position(self, s):
        x, y, *_ = self._boundary(s)
        return np.stack(np.broadcast_arrays(x, y), axis=-1)

    def tangent(self, s):
        _, _, tx, ty, _ = self._boundary(s)
        return np.stack(np.broadcast_arrays(tx, ty), axis=-1)

    def normal(self, s):
        """Inward normal, the tangent rotated by +90 degrees."""
        t = self.tangent(s)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def curvature(self, s):
        return self._boundary(s)[4]

    def diameter_bound(self) -> float:
        pts = self.positions
        return 2.0 * float(np.max(np.hypot(pts[:, 0], pts[:, 1])))

    def reduce(self, s):
        return np.mod(s, self.perimeter)


# -- constructors -----------------------------------------------------------

def _table_size(sample_count: int) -> int:
    m = 2048
    while m < 2 * sample_count:
        m *= 2
    return min(m, 16384)


def make_ellipse(spec: EllipseSpec, sample_count: int) -> BoundaryCurve:
    """Arclength-uniform sampling of an ellipse (circle when a1 == a2)."""
    if sample_count < 64:
        raise ValueError("sample_count must be at least 64")
    profile = EllipseProfile(spec.a1, spec.a2)
    table = build_table(profile, m=_table_size(sample_count))
    kind = "circle" if spec.a1 == spec.a2 else "ellipse"
    meta = {
        "kind": kind,
        "a1": spec.a1,
        "a2": spec.a2,
        "eccentricity": spec.eccentricity,
        "spec": spec,
    }
    return BoundaryCurve(table, sample_count, meta)


def make_flattened_oval(flatness_degree: int, sample_count: int,
                        a: float = 1.0, b: float = 0.8) -> BoundaryCurve:
    """Convex oval with zero-curvature points (polar-form Lame curve).

    Curvature vanishes exactly on the axes; the certificate check_pinched
    necessarily fails since tau*K -> 0 there.
    """
    if flatness_degree not in (4, 6):
        raise ValueError("flatness_degree must be 4 or 6")
    if sample_count < 64:
        raise ValueError("sample_count must be at least 64")
    profile = SuperellipseProfile(a, b, flatness_degree)
    table = build_table(profile, m=_table_size(sample_count))
    meta = {"kind": "flattened_oval", "degree": flatness_degree, "a": a, "b": b}
    return BoundaryCurve(table, sample_count, meta)


def make_fourier_perturbed(spec: EllipseSpec, modes, sample_count: int) -> BoundaryCurve:
    """Radially perturbed ellipse r(theta) = base * (1 + sum eps_k cos(k theta + psi_k)).

    Convexity is re-validated; a perturbation large enough to create inflection
    points is rejected.
    """
    if sample_count < 64:
        raise ValueError("sample_count must be at least 64")
    base = EllipseProfile(spec.a1, spec.a2)
    profile = FourierPerturbedProfile(base, modes)
    table = build_table(profile, m=_table_size(sample_count))
    meta = {
        "kind": "fourier_perturbed",
        "a1": spec.a1,
        "a2": spec.a2,
        "modes": [tuple(m) for m in modes],
        "spec": spec,
    }
    curve = BoundaryCurve(table, sample_count, meta)
    if not curve.strongly_convex:
        raise ValueError("perturbation destroys strong convexity")
    return curve


def curve_from_spec(domain: dict) -> BoundaryCurve:
    """Build a curve from a JSON-style domain spec (see README)."""
    kind = domain.get("kind")
    n = int(domain.get("samples", 2048))
    if kind == "ellipse":
        return make_ellipse(EllipseSpec(float(domain["a1"]), float(domain["a2"])), n)
    if kind == "circle":
        rr = float(domain.get("radius", 1.0))
        return make_ellipse(EllipseSpec(rr, rr), n)
    if kind == "flattened_oval":
        return make_flattened_oval(
            int(domain.get("degree", 4)), n,
            a=float(domain.get("a", 1.0)), b=float(domain.get("b", 0.8)),
        )
    if kind == "fourier_perturbed":
        spec = EllipseSpec(float(domain["a1"]), float(domain["a2"]))
        modes = [
            (int(m["k"]), float(m["eps"]), float(m.get("phase", 0.0)))
            for m in domain["modes"]
        ]
        return make_fourier_perturbed(spec, modes, n)
    raise ValueError(f"unknown domain kind: {kind!r}")


# -- chord queries ------------------------------------------------------------

def chord_many(curve: BoundaryCurve, s, r, backend=None):
    """Vectorised ray-boundary query: arrival arclength, reflected sine, length."""
    backend = backend or _kernels.active_backend()
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    s2, r1p, tau = backend.step_conservative(
        curve._ctx(backend), np.atleast_1d(s), np.atleast_1d(r)
    )
    return s2, r1p, tau


def chord(curve: BoundaryCurve, s: float, phi: float) -> ChordResult:
    """Chord from Upsilon(s) at angle phi from the inward normal."""
    if abs(phi) >= math.pi / 2:
        raise ValueError("tangential shot: |phi| must be < pi/2")
    s2, _, tau = chord_many(curve, [float(s)], [math.sin(phi)])
    if not np.isfinite(tau[0]) or tau[0] <= 0.0:
        raise ArithmeticError(
            f"chord root-finder failed at s={s}, phi={phi}: tau={tau[0]}"
        )
    return ChordResult(float(s2[0]), float(tau[0]))


def normal_chord_lengths(curve: BoundaryCurve, s) -> np.ndarray:
    """tau(s): length of the chord leaving Upsilon(s) along the inward normal."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    _, _, tau = chord_many(curve, s, np.zeros_like(s))
    return tau


def check_pinched(curve: BoundaryCurve, n_samples: int = 512) -> DkCertificate:
    """Certificate of membership in the pinched-curvature class (max tau*K < -1)."""
    if not curve.strongly_convex:
        return DkCertificate(
            max_tau_K=0.0, margin=-1.0, passes=False, samples=0,
            reason="curve is not strongly convex (curvature vanishes somewhere)",
        )
    ss = np.arange(n_samples) * (curve.perimeter / n_samples)
    tau = normal_chord_lengths(curve, ss)
    kap = curve.curvature(ss)
    tk = tau * kap
    mx = float(np.max(tk))
    return DkCertificate(
        max_tau_K=mx, margin=-1.0 - mx, passes=bool(mx < -1.0), samples=n_samples
    )
