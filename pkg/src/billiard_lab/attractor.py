"""Global attractor on a cell grid, Birkhoff trim, cone fields, graph transform.

The global attractor is the intersection of forward images of the annulus.
On a C x R cell grid we outer-approximate it: start from all cells and
repeatedly keep the cells hit by the images of kept-cell sample points
(3 x 3 per cell, including corners), so the occupied set always contains
the rasterised attractor and shrinks monotonically.

The Birkhoff attractor removes the "hairs" of the global attractor: of the
occupied set we keep the cells adjacent to the closures of both complement
components (bottom U and top V), after first pruning pendant filaments.
When the literal rule would disconnect a thick unconverged band and lose
the separation property, the U/V frontier shells are kept instead (the
trim mode is recorded on the grid).

Under pinched curvature and strong dissipation, a cone field around the
horizontal is strictly invariant; the attractor is then a graph and the
graph transform (push a candidate graph forward, resample) contracts to it
at rate ~ sqrt(lambda) per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.interpolate import PchipInterpolator

from .dynamics import ConstantDissipation, step_conservative_many, step_dissipative_many
from .geometry import BoundaryCurve, check_pinched, normal_chord_lengths

_N8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


# -- attractor grid -----------------------------------------------------------

@dataclass
class AttractorGrid:
    columns: int
    rows: int
    occupied: np.ndarray        # bool (columns, rows)
    iterations: int
    perimeter: float
    lam_sup: float
    trim_mode: str = "none"     # none | strict | shell

    @property
    def cell_size(self) -> Tuple[float, float]:
        return self.perimeter / self.columns, 2.0 / self.rows

    def cell_centers(self) -> np.ndarray:
        ii, jj = np.nonzero(self.occupied)
        ds, dr = self.cell_size
        return np.column_stack([(ii + 0.5) * ds, -1.0 + (jj + 0.5) * dr])

    def occupied_count(self) -> int:
        return int(self.occupied.sum())


def _sample_pattern(sub: int, inset: float = 1.0 / 64.0):
    """Per-cell sample offsets and the adjacency edges between them.

    sub >= 3: a sub x sub grid (near-corners, edge points, interior).
    sub == 2: the 4 near-corners plus the center, with perimeter and spoke
    edges -- the cheap pattern for production-size sweeps.

    Samples sit a hair inside the cell (inset fraction): exact-boundary
    samples can land on exact cell edges downstream (e.g. dyadic
    contractions), where floor ties would keep phantom rows alive forever.
    """
    if sub == 2:
        lo, hi = inset, 1.0 - inset
        oa = np.array([lo, lo, hi, hi, 0.5])
        ob = np.array([lo, hi, lo, hi, 0.5])
        edges = np.array([(0, 1), (1, 3), (3, 2), (2, 0),
                          (0, 4), (1, 4), (2, 4), (3, 4)], dtype=np.int64)
        return oa, ob, edges
    offs = inset + (1.0 - 2.0 * inset) * np.linspace(0.0, 1.0, sub)
    ga, gb = np.meshgrid(offs, offs, indexing="ij")
    edges = []
    for a in range(sub):
        for b in range(sub):
            k = a * sub + b
            if b + 1 < sub:
                edges.append((k, k + 1))
            if a + 1 < sub:
                edges.append((k, k + sub))
    return ga.ravel(), gb.ravel(), np.array(edges, dtype=np.int64)


def _cell_samples(ii, jj, columns, rows, perimeter, sub=3):
    oa, ob, _ = _sample_pattern(sub)
    ds = perimeter / columns
    dr = 2.0 / rows
    s = (ii[:, None] + oa[None, :]) * ds
    r = -1.0 + (jj[:, None] + ob[None, :]) * dr
    return s.ravel(), np.clip(r.ravel(), -1.0, 1.0)


def _rasterize(s, r, columns, rows, perimeter):
    i = np.mod(np.floor(s / perimeter * columns).astype(np.int64), columns)
    j = np.clip(np.floor((r + 1.0) * 0.5 * rows).astype(np.int64), 0, rows - 1)
    return i, j


def _mark_images(new, s2, r2, columns, rows, perimeter, sub, max_interp=16):
    """Mark image cells, rasterising the segments between adjacent sample images.

    Cell images stretch across many cells under the map; marking only the
    sample points would puncture the outer approximation, so the straight
    segments joining images of neighbouring samples are filled in too.
    """
    oa, _, edges = _sample_pattern(sub)
    n_pts = oa.size
    n_cells = s2.size // n_pts
    x = (s2 / perimeter * columns).reshape(n_cells, n_pts)
    y = ((r2 + 1.0) * 0.5 * rows).reshape(n_cells, n_pts)
    xa, xb = x[:, edges[:, 0]].ravel(), x[:, edges[:, 1]].ravel()
    ya, yb = y[:, edges[:, 0]].ravel(), y[:, edges[:, 1]].ravel()
    dx = np.mod(xb - xa + columns / 2, columns) - columns / 2  # shortest wrap
    dy = yb - ya
    span = np.maximum(np.abs(dx), np.abs(dy))

    # endpoints for everything; interior interpolants only where needed
    for xs, ys in ((xa, ya), (xb, yb)):
        i = np.mod(np.floor(xs).astype(np.int64), columns)
        j = np.clip(np.floor(ys).astype(np.int64), 0, rows - 1)
        new[i, j] = True
    long = span > 1.0
    if long.any():
        xl, yl = xa[long], ya[long]
        dxl, dyl = dx[long], dy[long]
        kmax = min(max_interp, max(2, int(np.ceil(span[long].max()))))
        for k in range(1, kmax):
            t = k / kmax
            i = np.mod(np.floor(xl + t * dxl).astype(np.int64), columns)
            j = np.clip(np.floor(yl + t * dyl).astype(np.int64), 0, rows - 1)
            new[i, j] = True


def iterate_annulus(curve: BoundaryCurve, diss, columns: int, rows: int, n: int,
                    subsample: int = 3, chunk: int = 1_000_000,
                    threads: int = 1, progress: bool = False) -> AttractorGrid:
    """Outer approximation of the global attractor after n sweeps.

    subsample selects the per-cell pattern (2 = corners + center, 3 = the
    default 3x3 grid).  Chunk-level threading is available but the numpy
    marking stage is GIL-bound; on small core counts threads = 1 is usually
    fastest.
    """
    if columns < 16 or rows < 16:
        raise ValueError("grid must be at least 16 x 16")
    if n < 1:
        raise ValueError("need at least one sweep")
    import os
    from concurrent.futures import ThreadPoolExecutor

    n_threads = threads if threads > 0 else (os.cpu_count() or 1)
    P = curve.perimeter
    occ = np.ones((columns, rows), dtype=bool)
    n_pts = _sample_pattern(subsample)[0].size
    per_chunk = max(1, chunk // n_pts)

    def push(args):
        ii_c, jj_c = args
        s, r = _cell_samples(ii_c, jj_c, columns, rows, P, subsample)
        s2, r2, _, _ = step_dissipative_many(curve, diss, s, r)
        return s2, r2

    for sweep in range(n):
        ii, jj = np.nonzero(occ)
        new = np.zeros_like(occ)
        chunks = [
            (ii[lo:lo + per_chunk], jj[lo:lo + per_chunk])
            for lo in range(0, ii.size, per_chunk)
        ]
        if n_threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                for s2, r2 in pool.map(push, chunks):
                    _mark_images(new, s2, r2, columns, rows, P, subsample)
        else:
            for args in chunks:
                s2, r2 = push(args)
                _mark_images(new, s2, r2, columns, rows, P, subsample)
        occ = new
        if progress:
            print(f"  sweep {sweep + 1}/{n}: {occ.sum()} cells", flush=True)
    lam_sup = diss.sup if hasattr(diss, "sup") else 1.0
    return AttractorGrid(columns, rows, occ, n, P, lam_sup)


# -- complement labelling -----------------------------------------------------

def complement_components(occ: np.ndarray):
    """(u_mask, v_mask, separates): 4-connected complement components touching
    the bottom / top rows, with wrap-around in the first (s) axis."""
    free = ~occ
    lab, _ = ndimage.label(free, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    # merge components across the s seam
    left, right = lab[0, :], lab[-1, :]
    parent = {}

    def find(x):
        while parent.get(x, x) != x:
            x = parent[x] = parent.get(parent[x], parent[x])
        return parent.get(x, x)

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for a, b in zip(left, right):
        if a > 0 and b > 0:
            union(int(a), int(b))
    flat = lab.ravel()
    if parent:
        lut = np.arange(lab.max() + 1)
        for k in range(1, lab.max() + 1):
            lut[k] = find(k)
        flat = lut[flat]
    lab = flat.reshape(lab.shape)

    u_labels = set(np.unique(lab[:, 0])) - {0}
    v_labels = set(np.unique(lab[:, -1])) - {0}
    u_mask = np.isin(lab, list(u_labels)) if u_labels else np.zeros_like(occ)
    v_mask = np.isin(lab, list(v_labels)) if v_labels else np.zeros_like(occ)
    separates = not (u_labels & v_labels)
    return u_mask, v_mask, separates


def _dilate8(mask: np.ndarray) -> np.ndarray:
    """8-neighbourhood dilation with wrap in the s axis only."""
    out = mask.copy()
    out |= np.roll(mask, 1, axis=0) | np.roll(mask, -1, axis=0)
    for m in (mask, np.roll(mask, 1, axis=0), np.roll(mask, -1, axis=0)):
        out[:, 1:] |= m[:, :-1]
        out[:, :-1] |= m[:, 1:]
    return out


def _prune_spurs(occ: np.ndarray, max_rounds: Optional[int] = None) -> np.ndarray:
    """Iteratively delete occupied cells with <= 1 occupied 8-neighbour."""
    occ = occ.copy()
    rounds = max_rounds or 4 * max(occ.shape)
    for _ in range(rounds):
        cnt = np.zeros(occ.shape, dtype=np.int16)
        for di, dj in _N8:
            m = np.roll(occ, di, axis=0)
            if dj == 1:
                shifted = np.zeros_like(m)
                shifted[:, 1:] = m[:, :-1]
            elif dj == -1:
                shifted = np.zeros_like(m)
                shifted[:, :-1] = m[:, 1:]
            else:
                shifted = m
            cnt += shifted
        spurs = occ & (cnt <= 1)
        if not spurs.any():
            break
        occ &= ~spurs
    return occ


def birkhoff_trim(grid: AttractorGrid) -> AttractorGrid:
    """Remove the hairs: keep cells adjacent to both complement closures.

    Stages: (1) spur pruning eats pendant filaments; (2) the literal rule
    keeps occupied cells 8-adjacent to closure(U) and closure(V), where the
    closure of a component includes its occupied frontier; (3) if the
    result no longer separates the annulus (thick unconverged bands), the
    U/V frontier shells of the pruned set are used instead.
    """
    occ0 = grid.occupied
    _, _, sep0 = complement_components(occ0)
    if not sep0:
        raise ValueError("grid does not separate the annulus; increase n or resolution")

    occ = _prune_spurs(occ0)
    u, v, sep = complement_components(occ)
    if not sep:  # pruning cannot merge complements, but guard anyway
        occ, (u, v) = occ0, complement_components(occ0)[:2]

    fr_u = occ & _dilate8(u)
    fr_v = occ & _dilate8(v)
    close_u = u | fr_u
    close_v = v | fr_v
    keep = occ & (_dilate8(close_u) | close_u) & (_dilate8(close_v) | close_v)

    mode = "strict"
    _, _, sep_keep = complement_components(keep)
    if not sep_keep:
        # thick unconverged band: the literal rule disconnects it, so fall
        # back to the spur-pruned set (complement stays exactly U union V)
        keep = occ
        mode = "pruned"
        _, _, sep_keep = complement_components(keep)
        if not sep_keep:
            raise ValueError("trim lost separation; grid too coarse for this regime")
    return replace(grid, occupied=keep, trim_mode=mode)


def forward_image_grid(curve, diss, grid: AttractorGrid, subsample: int = 3) -> AttractorGrid:
    """Rasterised forward image of a cell set (invariance diagnostics)."""
    ii, jj = np.nonzero(grid.occupied)
    s, r = _cell_samples(ii, jj, grid.columns, grid.rows, grid.perimeter, subsample)
    s2, r2, _, _ = step_dissipative_many(curve, diss, s, r)
    i2, j2 = _rasterize(s2, r2, grid.columns, grid.rows, grid.perimeter)
    new = np.zeros_like(grid.occupied)
    new[i2, j2] = True
    return replace(grid, occupied=new)


def graph_test(grid: AttractorGrid, max_graph_height: int = 3, min_gap: int = 2):
    """Column-run verdict: Graph | Fold(columns) | Inconclusive."""
    occ = grid.occupied
    fold_columns = []
    all_single_thin = True
    for i in range(grid.columns):
        col = occ[i]
        idx = np.nonzero(col)[0]
        if idx.size == 0:
            all_single_thin = False
            continue
        breaks = np.nonzero(np.diff(idx) > 1)[0]
        runs = np.split(idx, breaks + 1)
        if len(runs) == 1:
            if idx.size > max_graph_height:
                all_single_thin = False
            continue
        all_single_thin = False
        gaps = [runs[k + 1][0] - runs[k][-1] - 1 for k in range(len(runs) - 1)]
        if max(gaps) >= min_gap:
            fold_columns.append(i)
    if fold_columns:
        return "Fold", fold_columns
    return ("Graph", []) if all_single_thin else ("Inconclusive", [])


# -- cone field ---------------------------------------------------------------

@dataclass(frozen=True)
class ConeField:
    alpha0: float
    c0: float
    delta0: float
    K0: float
    mu0: float
    lambda1: float
    lambda_max_certified: float


def build_cone_field(curve: BoundaryCurve, mu0: float = 0.9,
                     n_samples: int = 512, margin_fraction: float = 0.9) -> ConeField:
    """Geometric constants of the invariant cone construction.

    Lengths are measured in perimeter units (tau/P, K*P) so the constants
    are scale-free.  The certified dissipation bound is

        lambda(Omega) = min(lambda1,
            mu0 a0 c0 / (2 (d0 K0^2 + 2 K0) + 2 a0 (d0 K0 + 1)))

    with a0 = c0 / (2 d0), and lambda1 the largest band half-width where
    tau K + nu < -c0 and tau / nu < d0 hold on T x [-lambda1, lambda1].
    c0 must sit strictly inside the pinching margin (the inequalities above
    are strict and saturate at r = 0), hence the margin_fraction knob.
    """
    cert = check_pinched(curve, n_samples)
    if not cert.passes:
        raise ValueError("cone field requires the pinched-curvature certificate")
    P = curve.perimeter
    c0 = margin_fraction * cert.margin
    delta0 = 1.01 * curve.diameter_bound() / P
    K0 = 1.01 * float(np.max(np.abs(curve.curvatures))) * P
    alpha0 = c0 / (2.0 * delta0)

    ss = np.arange(n_samples) * (P / n_samples)
    kap = curve.curvature(ss) * P

    def band_ok(lam_band):
        grid_r = np.linspace(-lam_band, lam_band, 9)
        for rv in grid_r:
            s2, r1p, tau = step_conservative_many(curve, ss, np.full(n_samples, rv))
            tau = tau / P
            nu = math.sqrt(1.0 - rv * rv)
            if np.max(tau * kap + nu) >= -c0 or np.max(tau / nu) >= delta0:
                return False
        return True

    lam1 = 0.5
    while lam1 > 1e-4 and not band_ok(lam1):
        lam1 *= 0.5
    denom = 2.0 * (delta0 * K0**2 + 2.0 * K0) + 2.0 * alpha0 * (delta0 * K0 + 1.0)
    lam_formula = mu0 * alpha0 * c0 / denom
    return ConeField(
        alpha0=alpha0, c0=c0, delta0=delta0, K0=K0, mu0=mu0,
        lambda1=lam1, lambda_max_certified=min(lam1, lam_formula),
    )


@dataclass
class ConeCheckReport:
    passes: bool
    min_margin: float
    n_failures: int
    failures: list
    cone: ConeField
    lam: float


def cone_contraction_check(curve, diss, cone: Optional[ConeField] = None,
                           grid=(128, 17)) -> ConeCheckReport:
    """Verify Df_lambda maps each sampled cone strictly inside the image cone.

    Cones are {|v_r| <= alpha0 nu(r) |v_x|} in the perimeter-normalised
    chart (x, r) = (s/P, r).  Constant dissipation only.
    """
    if not isinstance(diss, ConstantDissipation):
        raise ValueError("cone check implemented for constant dissipation")
    lam = diss.value
    if cone is None:
        cone = build_cone_field(curve)
    P = curve.perimeter
    ns, nr = grid
    ss = np.arange(ns) * (P / ns)
    rr = np.linspace(-lam, lam, nr)
    S, R = np.meshgrid(ss, rr, indexing="ij")
    s_f, r_f = S.ravel(), R.ravel()

    s2, r1p, tau = step_conservative_many(curve, s_f, r_f)
    K = curve.curvature(s_f) * P
    K2 = curve.curvature(s2) * P
    nu = np.sqrt(1.0 - r_f**2)
    nu2 = np.sqrt(np.maximum(1e-300, 1.0 - r1p**2))
    r2 = lam * r1p
    nu_im = np.sqrt(1.0 - r2**2)
    tauP = tau / P

    # Df in the normalised chart
    a11 = -(tauP * K + nu) / nu2
    a12 = tauP / (nu * nu2)
    a21 = lam * (tauP * K * K2 + K * nu2 + K2 * nu)
    a22 = -lam * (tauP * K2 + nu2) / nu

    margins = []
    fails = 0
    fail_list = []
    for sgn in (+1.0, -1.0):
        ux, ur = 1.0, sgn * cone.alpha0 * nu
        wx = a11 * ux + a12 * ur
        wr = a21 * ux + a22 * ur
        bound = cone.alpha0 * nu_im * np.abs(wx)
        margin = (bound - np.abs(wr)) / np.maximum(bound, 1e-300)
        margins.append(margin)
        bad = margin <= 0.0
        fails += int(bad.sum())
        if bad.any():
            idx = np.nonzero(bad)[0][:16]
            fail_list += [(float(s_f[k]), float(r_f[k]), float(margin[k])) for k in idx]
    mm = float(np.min(np.concatenate(margins)))
    return ConeCheckReport(
        passes=(fails == 0), min_margin=mm, n_failures=fails,
        failures=fail_list, cone=cone, lam=lam,
    )


def splitting_directions(curve, diss, s: float, r: float, iters: int = 12):
    """(Ec, Es) direction estimates at a point of the attractor.

    Ec by pushing the horizontal forward along the orbit (domination makes
    any cone direction converge to it); Es by pulling the vertical backward.
    """
    from .dynamics import PhasePoint, jacobian, step_dissipative

    p = PhasePoint(float(s), float(r))
    pts = [p]
    for _ in range(iters):
        pts.append(step_dissipative(curve, diss, pts[-1]))
    v = np.array([1.0, 0.0])
    for q in pts[:-1]:
        J, _ = jacobian(curve, diss, q)
        v = J @ v
        v /= np.hypot(*v)
    ec = v
    w = np.array([0.0, 1.0])
    for q in reversed(pts[:-1]):
        J, _ = jacobian(curve, diss, q)
        w = np.linalg.solve(J, w)
        w /= np.hypot(*w)
    return ec, w


# -- graph transform ----------------------------------------------------------

@dataclass
class CurveGraph:
    s_grid: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    cone_bound: float
    perimeter: float

    def __call__(self, s):
        P = self.perimeter
        ext_s = np.concatenate([self.s_grid, [P]])
        ext_v = np.concatenate([self.values, self.values[:1]])
        return np.interp(np.mod(s, P), ext_s, ext_v)


@dataclass
class GraphTransformResult:
    converged: bool
    iterations: int
    sup_distances: np.ndarray     # ||gamma_n^+ - gamma_n^-||_inf per step
    fitted_ratio: float
    limit: Optional[CurveGraph]
    upper: np.ndarray
    lower: np.ndarray
    warning: str = ""


def _push_graph(curve, diss, s_grid, gamma, P):
    """One graph-transform step: image of the graph, resampled on s_grid."""
    s2, r2, _, _ = step_dissipative_many(curve, diss, s_grid, gamma)
    # unwrap the image s so monotonicity is checkable
    s2u = np.unwrap(s2 * (2 * np.pi / P)) * (P / (2 * np.pi))
    if not np.all(np.diff(s2u) > 0):
        raise ArithmeticError("graph image lost s-monotonicity (dissipation too mild)")
    if not (s2u[-1] - s2u[0] < 2 * P):
        raise ArithmeticError("graph image wraps more than once")
    # periodic monotone resample
    base = np.concatenate([s2u - (s2u[-1] - s2u[0] + (s2u[1] - s2u[0])), s2u])
    vals = np.concatenate([r2, r2])
    interp = PchipInterpolator(base, vals)
    target = s2u[0] + np.mod(s_grid - s2u[0], P)
    return interp(target)


def graph_transform(curve, diss, n_iterations: int = 200, n_samples: int = 1024,
                    tol: float = 1e-10, cone: Optional[ConeField] = None) -> GraphTransformResult:
    """Iterate the graph transform from the two extreme flat graphs.

    Starts from gamma = +sup(lambda) and -sup(lambda); both sequences
    converge to the attractor graph when the cone field is contracted.
    A certified-bound violation is reported as a warning, not an error;
    the hard failure mode is loss of monotonicity of the image.
    """
    warning = ""
    if cone is None:
        try:
            cone = build_cone_field(curve)
        except ValueError:
            cone = None
            warning = "no pinched-curvature certificate; running uncertified"
    lam_sup = diss.sup
    if cone is not None and lam_sup >= cone.lambda_max_certified:
        warning = (
            f"lambda={lam_sup:g} above certified bound "
            f"{cone.lambda_max_certified:g}; contraction not guaranteed"
        )
    P = curve.perimeter
    s_grid = np.arange(n_samples) * (P / n_samples)
    hi = np.full(n_samples, +lam_sup)
    lo = np.full(n_samples, -lam_sup)
    dists = []
    converged = False
    it = 0
    for it in range(1, n_iterations + 1):
        hi = _push_graph(curve, diss, s_grid, hi, P)
        lo = _push_graph(curve, diss, s_grid, lo, P)
        d = float(np.max(np.abs(hi - lo)))
        dists.append(d)
        if d < tol:
            converged = True
            break
    dists = np.array(dists)

    # fitted per-step geometric decay over the recorded tail
    ratio = np.nan
    good = dists[(dists > 1e-14)]
    if good.size >= 3:
        logs = np.diff(np.log(good))
        ratio = float(np.exp(np.mean(logs[max(0, logs.size // 3):])))

    limit = None
    if converged:
        g = 0.5 * (hi + lo)
        dg = _periodic_gradient(g, P / n_samples)
        nu = np.sqrt(1.0 - g**2)
        limit = CurveGraph(
            s_grid=s_grid, values=g, derivatives=dg,
            cone_bound=float(np.max(np.abs(dg) / nu)), perimeter=P,
        )
    return GraphTransformResult(
        converged=converged, iterations=it, sup_distances=dists,
        fitted_ratio=ratio, limit=limit, upper=hi, lower=lo, warning=warning,
    )


def _periodic_gradient(vals: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(vals, -1) - np.roll(vals, 1)) / (2.0 * h)


# -- induced circle map -------------------------------------------------------

@dataclass
class CircleMapSample:
    s_grid: np.ndarray
    g_values: np.ndarray
    g_derivative: np.ndarray
    rotation_number: float
    rotation_is_exact_half: bool
    injective: bool
    mode_locking_unresolved: bool
    period2_fixed_points: int
    stability_alternates: bool
    invariance_defect: float


def induced_circle_map(curve, diss, graph: CurveGraph, n_orbit: int = 10_000,
                       n_starts: int = 16, agree_tol: float = 1e-6) -> CircleMapSample:
    """Sample g(s) = first coordinate of f_lambda on the invariant graph.

    The derivative uses the closed-form multiplier
        g'(s) = -(tau K + nu)/nu' + tau/(nu nu') gamma'(s),
    the rotation number comes from lifted orbit averaging (all starts must
    agree), and rational rotation 1/2 is detected exactly from sign changes
    of the lifted G^2(x) - x - 1.
    """
    P = graph.perimeter
    s_grid, gam = graph.s_grid, graph.values

    s2, r1p, tau = step_conservative_many(curve, s_grid, gam)
    r2 = diss(s2, r1p) * r1p
    defect = float(np.max(np.abs(r2 - graph(s2))))

    K = curve.curvature(s_grid)
    nu = np.sqrt(1.0 - gam**2)
    nu2 = np.sqrt(np.maximum(1e-300, 1.0 - r1p**2))
    gp = -(tau * K + nu) / nu2 + tau / (nu * nu2) * graph.derivatives

    # lift of g on [0,1): displacement in (0,1) by the twist property
    x = s_grid / P
    disp = np.mod(s2 / P - x, 1.0)
    g_lift = x + disp
    injective = bool(np.all(np.diff(g_lift) > 0.0))

    # exact period-2 combinatorics: roots of G(G(x)) - x - 1, i.e. of the
    # composed lift displacements d(x) + d(x + d(x)) - 1
    def disp_at(xq):
        return np.interp(np.mod(xq, 1.0), x, disp, period=1.0)

    d1 = disp_at(x)
    h = d1 + disp_at(x + d1) - 1.0
    zero = np.abs(h) < 1e-11
    h_next = np.roll(h, -1)
    zero_next = np.roll(zero, -1)
    crossings = (~zero) & (~zero_next) & (h * h_next < 0.0)
    root_idx = sorted(
        set(np.nonzero(zero)[0].tolist()) | set(np.nonzero(crossings)[0].tolist())
    )
    # collapse runs of adjacent indices (a root straddling several samples)
    roots = []
    for k in root_idx:
        if roots and (k - roots[-1] <= 1):
            continue
        roots.append(k)
    if len(roots) > 1 and (roots[0] == 0) and (roots[-1] >= h.size - 1):
        roots.pop()
    period2 = len(roots)
    exact_half = period2 > 0

    # stability alternation along the detected period-2 points
    g2p = gp * np.interp(np.mod(s2, P), s_grid, gp, period=P)
    stab = [abs(g2p[k]) < 1.0 for k in roots]
    alternates = (
        all(a != b for a, b in zip(stab, stab[1:] + stab[:1])) if len(stab) > 1 else True
    )

    # rotation by orbit averaging, all starts stepped together
    s_cur = np.linspace(0.0, P, n_starts, endpoint=False)
    totals = np.zeros(n_starts)
    for _ in range(n_orbit):
        r_cur = graph(s_cur)
        s_nxt, _, _ = step_conservative_many(curve, s_cur, r_cur)
        totals += np.mod(s_nxt / P - s_cur / P, 1.0)
        s_cur = s_nxt
    rhos = totals / n_orbit
    spread = float(rhos.max() - rhos.min())
    rho = float(np.mean(rhos))
    if exact_half:
        rho = 0.5
    return CircleMapSample(
        s_grid=s_grid, g_values=np.mod(s2, P), g_derivative=gp,
        rotation_number=rho, rotation_is_exact_half=exact_half,
        injective=injective, mode_locking_unresolved=(spread > agree_tol and not exact_half),
        period2_fixed_points=period2, stability_alternates=alternates,
        invariance_defect=defect,
    )


def zero_graph_multiplier(curve, s) -> np.ndarray:
    """g0'(s) = -(tau(s,0) K(s) + 1), the multiplier on the zero section."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    tau = normal_chord_lengths(curve, s)
    return -(tau * curve.curvature(s) + 1.0)
