"""Accessible sets, upper/lower rotation numbers, and dissipation sweeps.

The accessible sets are the attractor cells reachable by a vertical
segment from the top (upper set) or bottom (lower set) boundary without
crossing the attractor; per grid column these are the first trimmed cells
seen from above/below, giving envelope functions mu+(s) >= mu-(s).

Rotation numbers are estimated by iterating seeds on the accessible
envelopes BACKWARD (the accessible sets are backward invariant; forward
orbits leave them), re-projecting the transverse coordinate onto the
envelope each step and re-seeding on escape from the image annulus.  The
reported numbers are forward-equivalent (rho = -backward drift mod 1), so
rho- <= rho+ and 2-periodic dynamics reports 1/2.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .attractor import (
    AttractorGrid,
    birkhoff_trim,
    complement_components,
    graph_test,
    iterate_annulus,
)
from .dynamics import ConstantDissipation, step_dissipative_many, step_inverse_many
from .geometry import BoundaryCurve


@dataclass
class AccessibleSets:
    columns: int
    rows: int
    perimeter: float
    mu_plus: np.ndarray      # (columns,) envelope r-values (cell centers), nan if none
    mu_minus: np.ndarray
    cell_plus: np.ndarray    # (columns,) row indices, -1 if none
    cell_minus: np.ndarray

    @property
    def cell_height(self) -> float:
        return 2.0 / self.rows

    def envelope(self, which: str) -> np.ndarray:
        return self.mu_plus if which == "plus" else self.mu_minus

    def lookup(self, which: str, s: np.ndarray) -> np.ndarray:
        cols = np.mod(
            np.floor(np.asarray(s) / self.perimeter * self.columns).astype(np.int64),
            self.columns,
        )
        return self.envelope(which)[cols]


def accessible_sets(grid: AttractorGrid) -> AccessibleSets:
    """Per-column radially accessible envelopes of a (trimmed) grid."""
    occ = grid.occupied
    u, v, sep = complement_components(occ)
    if not sep:
        raise ValueError("grid does not separate; accessible sets undefined")
    C, R = grid.columns, grid.rows
    cell_p = np.full(C, -1, dtype=np.int64)
    cell_m = np.full(C, -1, dtype=np.int64)
    for i in range(C):
        col = occ[i]
        idx = np.nonzero(col)[0]
        if idx.size == 0:
            continue
        top = idx[-1]
        if np.all(v[i, top + 1:]) or top == R - 1:
            cell_p[i] = top
        bot = idx[0]
        if np.all(u[i, :bot]) or bot == 0:
            cell_m[i] = bot
    dr = 2.0 / R
    mu_p = np.where(cell_p >= 0, -1.0 + (cell_p + 0.5) * dr, np.nan)
    mu_m = np.where(cell_m >= 0, -1.0 + (cell_m + 0.5) * dr, np.nan)
    return AccessibleSets(C, R, grid.perimeter, mu_p, mu_m, cell_p, cell_m)


def cotangent_lipschitz_violations(sets: AccessibleSets, beta: float,
                                   slack_cells: float = 1.0):
    """One-sided Lipschitz audit of the envelopes at sample resolution.

    Checks mu(s') - mu(s) <= (s'-s)/P * cotan(beta/2) + slack for adjacent
    columns (s' > s), both envelopes; returns (violations_plus, violations_minus).
    """
    bound = (1.0 / sets.columns) / math.tan(beta / 2.0)
    slack = slack_cells * sets.cell_height
    out = []
    for mu in (sets.mu_plus, sets.mu_minus):
        good = np.isfinite(mu) & np.isfinite(np.roll(mu, -1))
        inc = np.roll(mu, -1) - mu
        out.append(int(np.sum(good & (inc > bound + slack))))
    return tuple(out)


# -- rotation estimation ------------------------------------------------------

@dataclass
class RotationEstimate:
    rho_plus: float
    rho_minus: float
    n_iterations: int
    per_start_plus: np.ndarray
    per_start_minus: np.ndarray
    spread_plus: float
    spread_minus: float
    direction: str
    contains_half: bool
    reseeds: int
    projections: int
    available: bool = True

    @property
    def width(self) -> float:
        return self.rho_plus - self.rho_minus


def _estimate_one_side(curve, diss, sets: AccessibleSets, which: str, n: int,
                       n_starts: int, direction: str, project_cells: float,
                       rng: np.random.Generator):
    P = curve.perimeter
    mu = sets.envelope(which)
    cols_ok = np.nonzero(np.isfinite(mu))[0]
    if cols_ok.size == 0:
        return None
    pick = cols_ok[np.linspace(0, cols_ok.size - 1, n_starts).astype(int)]
    s = (pick + 0.5) * (P / sets.columns)
    r = mu[pick].copy()
    tol = project_cells * sets.cell_height
    total = np.zeros(n_starts)
    reseeds = projections = 0
    backward = direction == "backward"
    for _ in range(n):
        if backward:
            s2, r2, ok = step_inverse_many(curve, diss, s, r)
        else:
            s2, r2, _, _ = step_dissipative_many(curve, diss, s, r)
            ok = np.ones(s2.shape, dtype=bool)
        # displacement, unwrapped by the twist sign of the direction
        d = np.mod(s2 / P - s / P, 1.0)
        if backward:
            d = d - 1.0   # backward steps drift negative
        total += d
        s, r = s2, r2
        # re-seed escapes, re-project transverse drift
        env = sets.lookup(which, s)
        bad = (~ok) | ~np.isfinite(env)
        if bad.any():
            reseeds += int(bad.sum())
            jcols = rng.choice(cols_ok, size=int(bad.sum()))
            s[bad] = (jcols + 0.5) * (P / sets.columns)
            r[bad] = mu[jcols]
            env = sets.lookup(which, s)
        drift = np.abs(r - env) >= tol
        if drift.any():
            projections += int(drift.sum())
            r[drift] = env[drift]
    per = total / n
    if backward:
        per = -per  # report forward-equivalent values
    per = np.mod(per, 1.0)
    return per, reseeds, projections


def rotation_numbers(curve, diss, sets: AccessibleSets, n: int = 2000,
                     n_starts: int = 16, direction: str = "backward",
                     project_cells: float = 0.0, seed: int = 0) -> RotationEstimate:
    """Upper/lower rotation estimates from accessible-envelope seeds.

    project_cells = 0 re-projects r onto the envelope after every step,
    which realises the envelope-restricted backward dynamics and keeps the
    estimate bias at O(cell height x twist).
    """
    if n < 100:
        raise ValueError("need at least 100 iterations for a meaningful estimate")
    rng = np.random.default_rng(seed)
    up = _estimate_one_side(curve, diss, sets, "plus", n, n_starts, direction,
                            project_cells, rng)
    dn = _estimate_one_side(curve, diss, sets, "minus", n, n_starts, direction,
                            project_cells, rng)
    if up is None or dn is None:
        return RotationEstimate(
            math.nan, math.nan, n, np.array([]), np.array([]), math.nan, math.nan,
            direction, False, 0, 0, available=False,
        )
    per_p, rs_p, pj_p = up
    per_m, rs_m, pj_m = dn
    rho_p = float(np.mean(per_p))
    rho_m = float(np.mean(per_m))
    if rho_p < rho_m:  # mod-1 bookkeeping can flip a collapsed interval
        rho_p, rho_m = rho_m, rho_p
        per_p, per_m = per_m, per_p
    return RotationEstimate(
        rho_plus=rho_p, rho_minus=rho_m, n_iterations=n,
        per_start_plus=per_p, per_start_minus=per_m,
        spread_plus=float(per_p.max() - per_p.min()),
        spread_minus=float(per_m.max() - per_m.min()),
        direction=direction,
        contains_half=bool(rho_m < 0.5 < rho_p),
        reseeds=rs_p + rs_m, projections=pj_p + pj_m,
    )


# -- sweeps -------------------------------------------------------------------

@dataclass
class PhaseDiagramRow:
    lam: float
    graph_verdict: str
    fold_columns: int
    rho_minus: float
    rho_plus: float
    width: float
    contains_half: bool
    spread: float
    horseshoe_flag: Optional[bool]
    attractor_area_lower: float
    occupied_cells: int
    trimmed_cells: int
    error: str = ""


@dataclass
class SweepBudgets:
    columns: int = 256
    rows: int = 256
    n_iter: int = 30
    rotation_steps: int = 2000
    n_starts: int = 16
    horseshoe_at_top: bool = False
    threads: int = 1
    seed: int = 0


def _sweep_row(curve, lam, budgets: SweepBudgets) -> PhaseDiagramRow:
    diss = ConstantDissipation(lam)
    try:
        grid = iterate_annulus(curve, diss, budgets.columns, budgets.rows, budgets.n_iter)
        trimmed = birkhoff_trim(grid)
        verdict, folds = graph_test(trimmed)
        sets = accessible_sets(trimmed)
        est = rotation_numbers(curve, diss, sets, n=budgets.rotation_steps,
                               n_starts=budgets.n_starts, seed=budgets.seed)
        u, v, _ = complement_components(trimmed.occupied)
        cell_area = (curve.perimeter / budgets.columns) * (2.0 / budgets.rows)
        area_lower = float(u.sum()) * cell_area
        return PhaseDiagramRow(
            lam=lam, graph_verdict=verdict, fold_columns=len(folds),
            rho_minus=est.rho_minus, rho_plus=est.rho_plus, width=est.width,
            contains_half=est.contains_half,
            spread=max(est.spread_plus, est.spread_minus),
            horseshoe_flag=None,
            attractor_area_lower=area_lower,
            occupied_cells=grid.occupied_count(),
            trimmed_cells=trimmed.occupied_count(),
        )
    except Exception as exc:  # per-row failures recorded, sweep continues
        return PhaseDiagramRow(
            lam=lam, graph_verdict="Error", fold_columns=0,
            rho_minus=math.nan, rho_plus=math.nan, width=math.nan,
            contains_half=False, spread=math.nan, horseshoe_flag=None,
            attractor_area_lower=math.nan, occupied_cells=0, trimmed_cells=0,
            error=str(exc),
        )


def lambda_sweep(curve, lambdas, budgets: Optional[SweepBudgets] = None) -> List[PhaseDiagramRow]:
    """Phase-transition sweep: one attractor/rotation row per dissipation value."""
    lambdas = sorted(float(x) for x in lambdas)
    if len(lambdas) < 2:
        raise ValueError("a sweep needs at least 2 dissipation values")
    budgets = budgets or SweepBudgets()
    if budgets.threads > 1:
        with ThreadPoolExecutor(max_workers=budgets.threads) as pool:
            rows = list(pool.map(lambda l: _sweep_row(curve, l, budgets), lambdas))
    else:
        rows = [_sweep_row(curve, lam, budgets) for lam in lambdas]

    if budgets.horseshoe_at_top and rows and rows[-1].graph_verdict != "Error":
        rows[-1].horseshoe_flag = _horseshoe_probe(curve, lambdas[-1])
    return rows


def _horseshoe_probe(curve, lam, arclength: float = 4.0, points: int = 30_000) -> Optional[bool]:
    from .manifolds import grow_stable, grow_unstable, homoclinic_intersections
    from .orbits import classify_two_periodic, find_two_periodic

    try:
        diss = ConstantDissipation(lam)
        orbs = find_two_periodic(curve, 32)
        saddles = [o for o in orbs if o.length_critical_type != "degenerate"
                   and classify_two_periodic(o, lam).orbit_type == "Saddle"]
        if not saddles:
            return None
        sd = saddles[0]
        u1, u2 = grow_unstable(curve, diss, sd, target_arclength=arclength, max_points=points)
        s1, s2 = grow_stable(curve, diss, sd, target_arclength=arclength, max_points=points)
        cert = homoclinic_intersections([s1, s2], [u1, u2], curve=curve)
        return bool(cert.passes)
    except Exception:
        return None
