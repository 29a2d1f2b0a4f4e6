"""Acceptance suite: one test per criterion, at the stated tolerances.

Each test prints a `[criterion N] PASS ...` line with the measured
quantities (visible under `pytest -s` or on failure).  The grid-heavy
criteria are marked slow but run by default.
"""

import math
import time

import numpy as np
import pytest

from billiard_lab.attractor import (
    birkhoff_trim,
    build_cone_field,
    cone_contraction_check,
    graph_test,
    graph_transform,
    induced_circle_map,
    iterate_annulus,
)
from billiard_lab.dynamics import (
    ConstantDissipation,
    PhasePoint,
    axial_symmetry_defect,
    finite_difference_jacobian,
    jacobian,
    step_conservative_many,
    step_dissipative_many,
    twist_certificate,
)
from billiard_lab.geometry import EllipseSpec, make_ellipse, make_flattened_oval
from billiard_lab.manifolds import cylinder_points, grow_unstable, hausdorff_distance
from billiard_lab.orbits import (
    classify_two_periodic,
    find_two_periodic,
    localize_real_complex_switch,
    numeric_period2_matrix,
    two_periodic_phase_points,
)
from billiard_lab.rotation import (
    accessible_sets,
    cotangent_lipschitz_violations,
    rotation_numbers,
)

LAM_MINUS_CLOSED = (1 - math.sqrt(0.75)) / (1 + math.sqrt(0.75))


def _report(n, detail):
    print(f"\n[criterion {n}] PASS — {detail}")


# -- shared heavy artifacts ----------------------------------------------------

@pytest.fixture(scope="module")
def orbits21(ellipse21):
    return find_two_periodic(ellipse21, 32)


@pytest.fixture(scope="module")
def oval_run10(oval4):
    """Criterion 10 pipeline, shared with criterion 12."""
    diss = ConstantDissipation(0.98)
    t0 = time.time()
    grid = iterate_annulus(oval4, diss, 1024, 1024, 80, subsample=2, threads=1)
    trimmed = birkhoff_trim(grid)
    sets = accessible_sets(trimmed)
    est = rotation_numbers(oval4, diss, sets, n=8000)
    elapsed = time.time() - t0
    return grid, trimmed, sets, est, elapsed


def test_criterion_01_jacobian_determinant(ellipse21, rng):
    diss = ConstantDissipation(0.37)
    worst_det = worst_fd = 0.0
    for _ in range(100):
        p = PhasePoint(rng.uniform(0, ellipse21.perimeter), rng.uniform(-0.95, 0.95))
        J, _ = jacobian(ellipse21, diss, p)
        worst_det = max(worst_det, abs(np.linalg.det(J) - 0.37))
        Jfd = finite_difference_jacobian(ellipse21, diss, p)
        worst_fd = max(worst_fd, float(np.max(np.abs(J - Jfd) / np.maximum(np.abs(J), 1e-12))))
    assert worst_det < 1e-10
    assert worst_fd < 1e-4
    _report(1, f"max |det - 0.37| = {worst_det:.2e}, max FD rel err = {worst_fd:.2e}")


def test_criterion_02_eigenvalue_case_table(ellipse21, orbits21):
    major, minor = orbits21[0], orbits21[1]
    assert abs(major.k12 - 49.0) < 1e-9
    assert abs(minor.k12 - 0.25) < 1e-9
    c_major = classify_two_periodic(major, 0.5)
    c_minor = classify_two_periodic(minor, 0.5)
    assert c_major.orbit_type == "Saddle"
    assert c_minor.orbit_type == "Sink"
    assert abs(c_minor.lambda_minus - LAM_MINUS_CLOSED) < 1e-10

    # numerically assembled Df^2 vs the quadratic-formula roots
    worst = 0.0
    for orbit, cls in ((major, c_major), (minor, c_minor)):
        M = numeric_period2_matrix(ellipse21, ConstantDissipation(0.5), orbit)
        ev = np.linalg.eigvals(M)
        ev = ev[np.argsort(np.abs(ev))]
        for a, b in zip(ev, cls.eigenvalues):
            d = min(abs(a - b), abs(a - np.conj(b))) / max(abs(b), 1e-12)
            worst = max(worst, float(d))
    assert worst < 1e-6
    mu2 = c_major.eigenvalues[1].real
    assert abs(mu2 - 109.2477) < 1e-3
    _report(2, f"k12 = (49, 0.25), lambda_- err = "
               f"{abs(c_minor.lambda_minus - LAM_MINUS_CLOSED):.1e}, "
               f"mu2 = {mu2:.4f}, eig rel err = {worst:.1e}")


def test_criterion_03_threshold_bisection(ellipse21, orbits21):
    minor = orbits21[1]
    lam_star = localize_real_complex_switch(minor, ellipse21, tol=1e-10)
    err = abs(lam_star - LAM_MINUS_CLOSED)
    assert err < 1e-8
    _report(3, f"bisection lambda_- = {lam_star:.10f}, err = {err:.1e}")


@pytest.mark.slow
def test_criterion_04_circle_collapse(circle):
    diss = ConstantDissipation(0.5)
    grid = iterate_annulus(circle, diss, 512, 512, 20, threads=1)
    # occupied cells confined to the rows meeting |r| <= 1e-6
    dr = 2.0 / 512
    j_lo = int(((-1e-6) + 1.0) / 2 * 512)
    j_hi = int(((1e-6) + 1.0) / 2 * 512)
    jj = np.nonzero(grid.occupied)[1]
    assert jj.min() >= j_lo and jj.max() <= j_hi
    trimmed = birkhoff_trim(grid)
    verdict, _ = graph_test(trimmed)
    assert verdict == "Graph"
    sets = accessible_sets(trimmed)
    est = rotation_numbers(circle, diss, sets, n=2000)
    spread = max(est.spread_plus, est.spread_minus)
    assert spread < 1e-6
    _report(4, f"band rows [{jj.min()}, {jj.max()}] (centre {256}), verdict Graph, "
               f"rotation spread = {spread:.1e}")


@pytest.fixture(scope="module")
def ellipse_branches(ellipse21, orbits21):
    diss = ConstantDissipation(0.5)
    saddle = orbits21[0]
    out = []
    for bounce in (0, 1):
        out += list(grow_unstable(ellipse21, diss, saddle,
                                  target_arclength=40.0, max_points=120_000,
                                  bounce_index=bounce))
    return out


@pytest.mark.slow
def test_criterion_05_ellipse_attractor_identity(ellipse21, orbits21, ellipse_branches):
    t0 = time.time()
    diss = ConstantDissipation(0.5)
    grid = iterate_annulus(ellipse21, diss, 512, 512, 30, threads=1)
    trimmed = birkhoff_trim(grid)

    manifold_pts = np.vstack(
        [br.polyline for br in ellipse_branches]
        + [np.array(two_periodic_phase_points(ellipse21.metadata["spec"], ellipse21))]
    )
    cells = trimmed.cell_centers()
    d = hausdorff_distance(cylinder_points(ellipse21, cells),
                           cylinder_points(ellipse21, manifold_pts))
    diag = math.hypot(ellipse21.perimeter / 512, 2.0 / 512)
    elapsed = time.time() - t0
    assert d <= 2 * diag
    assert elapsed <= 300.0
    _report(5, f"Hausdorff = {d:.4f} <= 2 diag = {2 * diag:.4f}, "
               f"elapsed {elapsed:.0f}s")


def test_criterion_06_branch_pairing(ellipse_branches):
    for pair in (ellipse_branches[:2], ellipse_branches[2:]):
        sinks = [b.arrived_sink for b in pair]
        assert all(s is not None for s in sinks)
        assert sinks[0] != sinks[1]
    _report(6, "each bounce's two unstable branches terminate at distinct sinks: "
               + ", ".join(b.arrived_sink for b in ellipse_branches))


@pytest.mark.slow
def test_criterion_07_lyapunov_monotone_and_convergence(ellipse21, rng):
    spec = ellipse21.metadata["spec"]
    B = spec.focal_matrix
    diss = ConstantDissipation(0.5)
    n_orbits, n_steps = 100, 10_000
    s = rng.uniform(0, ellipse21.perimeter, n_orbits)
    r = rng.uniform(-0.98, 0.98, n_orbits)

    from billiard_lab.orbits import phase_to_xv
    x, v = phase_to_xv(ellipse21, s, r)
    L_prev = np.einsum("ij,nj,ni->n", B, x, v)
    max_inc = -np.inf
    for _ in range(n_steps):
        s, r, _, _ = step_dissipative_many(ellipse21, diss, s, r)
        x, v = phase_to_xv(ellipse21, s, r)
        L = np.einsum("ij,nj,ni->n", B, x, v)
        max_inc = max(max_inc, float(np.max(L - L_prev)))
        L_prev = L
    assert max_inc < 1e-12

    pts = two_periodic_phase_points(spec, ellipse21)
    P = ellipse21.perimeter
    d2 = np.min([
        np.hypot(np.abs(np.mod(s - q[0] + P / 2, P) - P / 2), r - q[1]) for q in pts
    ], axis=0)
    assert np.max(d2) < 1e-6
    _report(7, f"max L increment = {max_inc:.2e}, "
               f"max final distance to 2-periodic set = {np.max(d2):.2e}")


@pytest.mark.slow
def test_criterion_08_graph_regime(ellipse_e03):
    lam = 0.02
    diss = ConstantDissipation(lam)
    cone = build_cone_field(ellipse_e03)
    rep = cone_contraction_check(
        ellipse_e03, ConstantDissipation(0.5 * cone.lambda_max_certified), cone)
    assert rep.passes

    gt = graph_transform(ellipse_e03, diss, n_iterations=120, n_samples=1024)
    assert gt.converged
    assert gt.fitted_ratio <= 0.75

    cm = induced_circle_map(ellipse_e03, diss, gt.limit, n_orbit=4000)
    assert cm.rotation_is_exact_half and cm.rotation_number == 0.5

    grid = iterate_annulus(ellipse_e03, diss, 512, 512, 30, threads=1)
    verdict, _ = graph_test(birkhoff_trim(grid))
    assert verdict == "Graph"
    _report(8, f"cone margin {rep.min_margin:.3f} below lambda(Omega) = "
               f"{cone.lambda_max_certified:.4f}; contraction ratio "
               f"{gt.fitted_ratio:.3f} <= 0.75; rotation 1/2 exact; grid Graph")


@pytest.mark.slow
def test_criterion_09_non_graph_regime(ellipse21):
    t0 = time.time()
    grid = iterate_annulus(ellipse21, ConstantDissipation(0.05), 1024, 1024, 60,
                           threads=1)
    trimmed = birkhoff_trim(grid)
    verdict, folds = graph_test(trimmed)
    assert verdict == "Fold"
    _report(9, f"verdict Fold ({len(folds)} fold columns), "
               f"elapsed {time.time() - t0:.0f}s")


@pytest.mark.slow
def test_criterion_10_rotation_split(oval_run10):
    grid, trimmed, sets, est, elapsed = oval_run10
    spread = max(est.spread_plus, est.spread_minus)
    assert est.width > 0.1
    assert spread < 5e-3
    assert est.contains_half
    assert elapsed <= 600.0
    _report(10, f"rho = [{est.rho_minus:.4f}, {est.rho_plus:.4f}], width "
                f"{est.width:.3f} > 0.1, spread {spread:.1e}, half contained, "
                f"elapsed {elapsed:.0f}s")


def test_criterion_11_twist_symmetry_stationarity(circle, ellipse21, ellipse_e03,
                                                  oval4, rng):
    diss = ConstantDissipation(0.5)
    betas = {}
    for name, curve in (("circle", circle), ("ellipse21", ellipse21),
                        ("ellipse_e03", ellipse_e03), ("oval", oval4)):
        cert = twist_certificate(curve, diss, grid=(200, 200))
        assert cert.passes, name
        betas[name] = cert.beta

    pts = np.column_stack([rng.uniform(0, ellipse21.perimeter, 1000),
                           rng.uniform(-0.95, 0.95, 1000)])
    defect = axial_symmetry_defect(ellipse21, diss, 0.0, pts)
    assert defect < 1e-9

    from billiard_lab.dynamics import action_residual
    worst = 0.0
    for s0, r0 in ((0.7, 0.4), (3.1, -0.2), (5.9, 0.66)):
        s = np.array([s0]); r = np.array([r0])
        orbit = [PhasePoint(s0, r0)]
        for _ in range(50):
            s, r, _ = step_conservative_many(ellipse21, s, r)
            orbit.append(PhasePoint(float(s[0]), float(r[0])))
        worst = max(worst, action_residual(ellipse21, orbit, 1.0).max_residual)
    assert worst < 1e-8
    _report(11, f"twist betas = { {k: round(v, 4) for k, v in betas.items()} }, "
                f"symmetry defect = {defect:.1e}, stationarity = {worst:.1e}")


@pytest.mark.slow
def test_criterion_12_envelope_lipschitz(oval4, oval_run10):
    _, _, sets, _, _ = oval_run10
    cert = twist_certificate(oval4, ConstantDissipation(0.98), grid=(100, 100))
    vp, vm = cotangent_lipschitz_violations(sets, cert.beta)
    assert vp == 0 and vm == 0
    _report(12, f"one-sided cotangent bound holds at every adjacent column pair "
                f"(beta = {cert.beta:.5f})")
