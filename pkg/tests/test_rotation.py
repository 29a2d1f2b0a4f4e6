import math

import numpy as np
import pytest

from billiard_lab.attractor import birkhoff_trim, graph_test, iterate_annulus
from billiard_lab.dynamics import ConstantDissipation, step_inverse_many, twist_certificate
from billiard_lab.rotation import (
    SweepBudgets,
    accessible_sets,
    cotangent_lipschitz_violations,
    lambda_sweep,
    rotation_numbers,
)


@pytest.fixture(scope="module")
def circle_sets(circle):
    grid = iterate_annulus(circle, ConstantDissipation(0.5), 128, 128, 12)
    return birkhoff_trim(grid)


@pytest.fixture(scope="module")
def ellipse_sets(ellipse21):
    grid = iterate_annulus(ellipse21, ConstantDissipation(0.5), 256, 256, 22)
    return birkhoff_trim(grid)


class TestAccessibleSets:
    def test_circle_envelopes_collapse(self, circle_sets):
        sets = accessible_sets(circle_sets)
        assert np.all(np.isfinite(sets.mu_plus))
        assert np.all(np.isfinite(sets.mu_minus))
        # the band straddles r = 0: both envelopes within one cell of zero
        assert np.max(np.abs(sets.mu_plus)) <= 2 * sets.cell_height
        assert np.max(np.abs(sets.mu_minus)) <= 2 * sets.cell_height
        assert np.all(sets.mu_minus <= sets.mu_plus + 1e-15)

    def test_envelope_order(self, ellipse_sets):
        sets = accessible_sets(ellipse_sets)
        ok = np.isfinite(sets.mu_plus) & np.isfinite(sets.mu_minus)
        assert ok.all()
        assert np.all(sets.mu_minus[ok] <= sets.mu_plus[ok] + 1e-15)

    def test_graph_grid_envelopes_agree(self, circle_sets):
        verdict, _ = graph_test(circle_sets)
        assert verdict == "Graph"
        sets = accessible_sets(circle_sets)
        assert np.max(sets.mu_plus - sets.mu_minus) <= sets.cell_height + 1e-15

    def test_backward_invariance_circle_exact(self, circle, circle_sets):
        # on the circle the accessible envelopes are exactly invariant under
        # the backward step at cell resolution
        sets = accessible_sets(circle_sets)
        cols = np.arange(0, sets.columns, 5)
        P = circle.perimeter
        s = (cols + 0.5) * (P / sets.columns)
        for which in ("plus", "minus"):
            r = sets.envelope(which)[cols]
            s2, r2, ok = step_inverse_many(circle, ConstantDissipation(0.5), s, r)
            lo = sets.lookup("minus", s2[ok]) - sets.cell_height
            hi = sets.lookup("plus", s2[ok]) + sets.cell_height
            assert np.all((r2[ok] >= lo) & (r2[ok] <= hi))

    def test_backward_invariance_at_cell_resolution(self, ellipse21, ellipse_sets):
        # backward images of accessible samples land in the accessible
        # columns' cell runs up to the propagated seed uncertainty: seeds sit
        # a few rasterisation cells off the attractor and the backward step
        # amplifies that by ||Df^-1||, so the containment is quantitative
        from billiard_lab.dynamics import PhasePoint, jacobian

        lam = 0.5
        diss = ConstantDissipation(lam)
        sets = accessible_sets(ellipse_sets)
        cols = np.arange(0, sets.columns, 7)
        P = ellipse21.perimeter
        s_all = (cols + 0.5) * (P / sets.columns)
        total = inside = 0
        for which in ("plus", "minus"):
            r_all = sets.envelope(which)[cols]
            keep = np.abs(r_all) <= 0.8 * lam  # away from the near-tangential ring
            s, r = s_all[keep], r_all[keep]
            s2, r2, ok = step_inverse_many(ellipse21, diss, s, r)
            lo = sets.lookup("minus", s2[ok])
            hi = sets.lookup("plus", s2[ok])
            for sv, rv, lov, hiv in zip(s2[ok], r2[ok], lo, hi):
                J, _ = jacobian(ellipse21, diss, PhasePoint(float(sv), float(rv)))
                amp = float(np.max(np.sum(np.abs(np.linalg.inv(J)), axis=1)))
                slack = (1.0 + amp) * sets.cell_height
                total += 1
                inside += int(lov - slack <= rv <= hiv + slack)
                # hard cap: never further than the amplified rasterisation fat
                assert lov - 4 * slack <= rv <= hiv + 4 * slack
        assert inside / total >= 0.6

class TestRotationNumbers:
    def test_circle_half_tiny_spread(self, circle, circle_sets):
        sets = accessible_sets(circle_sets)
        est = rotation_numbers(circle, ConstantDissipation(0.5), sets, n=2000)
        # value bias is O(cell height * twist): ~0.01 at 128 rows
        assert abs(est.rho_plus - 0.5) < 2e-2
        assert abs(est.rho_minus - 0.5) < 2e-2
        assert est.spread_plus < 1e-6 and est.spread_minus < 1e-6

    def test_ellipse_half(self, ellipse21, ellipse_sets):
        sets = accessible_sets(ellipse_sets)
        est = rotation_numbers(ellipse21, ConstantDissipation(0.5), sets, n=3000)
        assert abs(est.rho_plus - 0.5) < 2e-3
        assert abs(est.rho_minus - 0.5) < 2e-3

    def test_forward_direction_flag(self, ellipse21, ellipse_sets):
        sets = accessible_sets(ellipse_sets)
        est = rotation_numbers(ellipse21, ConstantDissipation(0.5), sets,
                               n=1500, direction="forward")
        assert est.direction == "forward"
        assert abs(est.rho_plus - 0.5) < 5e-3

    def test_requires_iterations(self, ellipse21, ellipse_sets):
        sets = accessible_sets(ellipse_sets)
        with pytest.raises(ValueError):
            rotation_numbers(ellipse21, ConstantDissipation(0.5), sets, n=10)

    def test_consistency_with_circle_map(self, ellipse_e03):
        # when the graph transform converges, the accessible-set estimate and
        # the induced circle map agree
        from billiard_lab.attractor import graph_transform, induced_circle_map
        lam = 0.02
        diss = ConstantDissipation(lam)
        res = graph_transform(ellipse_e03, diss, n_iterations=80, n_samples=512)
        cm = induced_circle_map(ellipse_e03, diss, res.limit, n_orbit=1500)
        grid = iterate_annulus(ellipse_e03, diss, 256, 256, 20)
        sets = accessible_sets(birkhoff_trim(grid))
        est = rotation_numbers(ellipse_e03, diss, sets, n=2000)
        assert abs(est.rho_plus - cm.rotation_number) < 2e-3
        assert abs(est.rho_minus - cm.rotation_number) < 2e-3


class TestLipschitzEnvelope:
    def test_graph_regime_satisfies_bound(self, ellipse21, ellipse_sets):
        cert = twist_certificate(ellipse21, ConstantDissipation(0.5), grid=(100, 60))
        sets = accessible_sets(ellipse_sets)
        vp, vm = cotangent_lipschitz_violations(sets, cert.beta)
        assert vp == 0 and vm == 0


class TestSweep:
    def test_circle_rows_all_graph(self, circle):
        # rasterised sweeps equilibrate at a band of O(1/(1-lambda)) cells,
        # so Graph verdicts at 128 rows need moderate dissipation values
        budgets = SweepBudgets(columns=128, rows=128, n_iter=30,
                               rotation_steps=600, threads=1)
        rows = lambda_sweep(circle, [0.3, 0.4, 0.5], budgets)
        assert [r.lam for r in rows] == [0.3, 0.4, 0.5]
        for r in rows:
            assert r.graph_verdict == "Graph"
            assert r.width < 2e-2  # O(cell * twist) bias at 128 rows
            assert r.error == ""

    def test_two_values_required(self, circle):
        with pytest.raises(ValueError):
            lambda_sweep(circle, [0.5], SweepBudgets())

    def test_area_diagnostic_converges_from_below(self, oval4):
        # the measured lower-complement area grows monotonically with the
        # sweep count toward its limit (outer approximation shrinks); for
        # constant dissipation the limit area is lambda-independent, so the
        # meaningful trend is in n, not in lambda
        areas = []
        for n in (6, 15, 40):
            budgets = SweepBudgets(columns=128, rows=128, n_iter=n,
                                   rotation_steps=400, threads=1)
            rows = lambda_sweep(oval4, [0.9, 0.98], budgets)
            areas.append(rows[1].attractor_area_lower)
        assert areas[0] < areas[2]
        assert areas[1] <= areas[2] + 1e-12

    def test_threaded_matches_serial(self, circle):
        b1 = SweepBudgets(columns=64, rows=64, n_iter=8, rotation_steps=300, threads=1)
        b2 = SweepBudgets(columns=64, rows=64, n_iter=8, rotation_steps=300, threads=2)
        r1 = lambda_sweep(circle, [0.4, 0.7], b1)
        r2 = lambda_sweep(circle, [0.4, 0.7], b2)
        for a, b in zip(r1, r2):
            assert a.graph_verdict == b.graph_verdict
            assert a.occupied_cells == b.occupied_cells
            assert abs(a.rho_plus - b.rho_plus) < 1e-12
