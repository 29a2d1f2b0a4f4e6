import math

import numpy as np
import pytest

from billiard_lab.dynamics import ConstantDissipation, PhasePoint
from billiard_lab.orbits import (
    classify_nonconstant,
    classify_two_periodic,
    confocal_parameter,
    converge_to_two_periodic,
    find_two_periodic,
    length_hessian,
    localize_real_complex_switch,
    lyapunov_audit,
    numeric_period2_matrix,
    phase_to_xv,
)

LAM_MINUS_21 = (1 - math.sqrt(0.75)) / (1 + math.sqrt(0.75))


@pytest.fixture(scope="module")
def orbits21(ellipse21):
    return find_two_periodic(ellipse21, 32)


class TestFindTwoPeriodic:
    def test_exactly_two_on_ellipse(self, orbits21, ellipse21):
        assert len(orbits21) == 2
        major, minor = orbits21
        P = ellipse21.perimeter
        assert abs(major.tau - 4.0) < 1e-9
        assert abs(minor.tau - 2.0) < 1e-9
        assert abs(major.k12 - 49.0) < 1e-9
        assert abs(minor.k12 - 0.25) < 1e-9
        assert major.length_critical_type == "max"
        assert minor.length_critical_type == "saddle"
        for o in orbits21:
            assert o.perpendicularity_residual < 1e-9
        assert abs(minor.s1 - P / 4) < 1e-8 and abs(minor.s2 - 3 * P / 4) < 1e-8

    def test_circle_degenerate_family(self, circle):
        orbs = find_two_periodic(circle, 12)
        assert len(orbs) >= 2
        assert all(o.length_critical_type == "degenerate" for o in orbs)

    def test_perturbed_finitely_many_nondegenerate(self, perturbed_e03):
        orbs = find_two_periodic(perturbed_e03, 32)
        assert len(orbs) >= 2
        assert all(o.length_critical_type != "degenerate" for o in orbs)
        # oracle: exhaustive fine-grid sign scan of the perpendicularity gradient
        # (each found chord must be a genuine zero of both gradient components)
        from billiard_lab.dynamics import length_gradient
        for o in orbs:
            d1, d2, _ = length_gradient(perturbed_e03, np.array([o.s1]), np.array([o.s2]))
            assert abs(d1[0]) + abs(d2[0]) < 1e-9


class TestClassification:
    def test_major_axis_saddle(self, orbits21):
        c = classify_two_periodic(orbits21[0], 0.5)
        assert c.orbit_type == "Saddle" and c.case_label == "a"
        assert abs(c.trace - (2.25 * 49 - 1.0)) < 1e-9
        # quadratic-formula roots
        assert abs(c.eigenvalues[1].real - 109.24771162254763) < 1e-6
        assert abs(c.eigenvalues[0].real * c.eigenvalues[1].real - 0.25) < 1e-10

    def test_minor_axis_sink_complex(self, orbits21):
        c = classify_two_periodic(orbits21[1], 0.5)
        assert c.orbit_type == "Sink" and c.case_label == "c"
        assert c.is_complex
        assert abs(c.moduli[0] - 0.5) < 1e-10 and abs(c.moduli[1] - 0.5) < 1e-10
        assert abs(c.lambda_minus - LAM_MINUS_21) < 1e-10

    def test_minor_axis_real_below_threshold(self, orbits21):
        c = classify_two_periodic(orbits21[1], 0.5 * LAM_MINUS_21)
        assert c.orbit_type == "Sink" and not c.is_complex
        lam = 0.5 * LAM_MINUS_21
        m1, m2 = c.eigenvalues[0].real, c.eigenvalues[1].real
        assert lam**2 < m1 <= m2 < 1.0

    def test_trace_det_invariants(self, orbits21):
        # mu1*mu2 = lam^2 and mu1+mu2 = (1+lam)^2 k12 - 2 lam
        for o in orbits21:
            for lam in (0.1, 0.5, 0.9):
                c = classify_two_periodic(o, lam)
                prod = c.eigenvalues[0] * c.eigenvalues[1]
                tot = c.eigenvalues[0] + c.eigenvalues[1]
                assert abs(prod - lam**2) < 1e-10
                assert abs(tot - ((1 + lam) ** 2 * o.k12 - 2 * lam)) < 1e-10

    def test_synthetic_parabolic(self, orbits21):
        from dataclasses import replace
        o = replace(orbits21[0], k12=1.0)
        c = classify_two_periodic(o, 0.37)
        assert c.orbit_type == "Parabolic"
        assert abs(c.eigenvalues[0].real - 0.37**2) < 1e-12
        assert abs(c.eigenvalues[1].real - 1.0) < 1e-12

    def test_synthetic_case_d_scalar(self, orbits21):
        from dataclasses import replace
        o = replace(orbits21[0], k12=0.0)
        c = classify_two_periodic(o, 0.6)
        assert c.orbit_type == "Sink" and c.scalar_multiple_flag
        assert abs(c.eigenvalues[0].real + 0.6) < 1e-12

    def test_synthetic_case_e_bar_lambda(self, orbits21):
        from dataclasses import replace
        o = replace(orbits21[0], k12=-0.5)
        lam_bar = (1 - math.sqrt(0.5)) / (1 + math.sqrt(0.5))
        below = classify_two_periodic(o, 0.5 * lam_bar)
        above = classify_two_periodic(o, min(0.99, 2 * lam_bar))
        assert below.orbit_type == "Sink" and above.orbit_type == "Saddle"
        assert abs(below.lambda_bar - lam_bar) < 1e-12
        # saddle branch: mu2 < -1
        assert above.eigenvalues[1].real < -1.0

    def test_synthetic_case_f(self, orbits21):
        from dataclasses import replace
        o = replace(orbits21[0], k12=-2.0)
        for lam in (0.1, 0.5, 0.9):
            c = classify_two_periodic(o, lam)
            assert c.orbit_type == "Saddle" and c.case_label == "f"
            assert c.eigenvalues[1].real < -1.0


class TestNumericEigenOracle:
    def test_closed_form_vs_numeric(self, ellipse21, orbits21):
        for o in orbits21:
            for lam in (0.1, 0.5, 0.9):
                M = numeric_period2_matrix(ellipse21, ConstantDissipation(lam), o)
                ev = np.linalg.eigvals(M)
                ev = ev[np.argsort(np.abs(ev))]
                c = classify_two_periodic(o, lam)
                for a, b in zip(ev, c.eigenvalues):
                    # conjugation order of a complex pair is arbitrary
                    d = min(abs(a - b), abs(a - np.conj(b)))
                    assert d / max(abs(b), 1e-12) < 1e-6

    def test_lambda_to_zero_limit(self, ellipse21, orbits21):
        # eigenvalues tend to {0, k12}; the large eigenvector tends to the
        # horizontal, the small one to the kernel direction (tau, tau K1 + 1)
        for o in orbits21:
            M = numeric_period2_matrix(ellipse21, ConstantDissipation(1e-4), o)
            ev, vecs = np.linalg.eig(M)
            idx = np.argsort(np.abs(ev))
            assert abs(ev[idx[0]]) < 1e-3
            assert abs(ev[idx[1]] - o.k12) / abs(o.k12) < 1e-2
            v_big = vecs[:, idx[1]]
            ang_h = abs(math.atan2(v_big[1], v_big[0])) % math.pi
            assert min(ang_h, math.pi - ang_h) < 1e-2
            v_small = vecs[:, idx[0]]
            kernel = np.array([o.tau, o.tau * o.K1 + 1.0])
            kernel /= np.hypot(*kernel)
            cross = abs(v_small[0] * kernel[1] - v_small[1] * kernel[0])
            assert cross < 1e-2

    def test_threshold_bisection(self, ellipse21, orbits21):
        minor = orbits21[1]
        lam_star = localize_real_complex_switch(minor, ellipse21, tol=1e-10)
        assert abs(lam_star - LAM_MINUS_21) < 1e-8


class TestNonconstant:
    def test_reduces_to_constant(self, orbits21):
        for o in orbits21:
            a = classify_nonconstant(o, 0.5, 0.5)
            b = classify_two_periodic(o, 0.5)
            assert a.orbit_type == b.orbit_type
            assert abs(a.trace - b.trace) < 1e-12

    def test_parabolic_has_unit_eigenvalue(self, orbits21):
        from dataclasses import replace
        o = replace(orbits21[0], k12=1.0)
        c = classify_nonconstant(o, 0.3, 0.8)
        assert c.orbit_type == "Parabolic"
        # chi(1) = (1+l1)(1+l2)(1-k12) = 0: one eigenvalue is exactly 1
        assert min(abs(c.eigenvalues[0] - 1), abs(c.eigenvalues[1] - 1)) < 1e-12

    def test_spec_arithmetic_example(self, orbits21):
        c = classify_nonconstant(orbits21[0], 0.6, 0.8)  # k12 = 49
        assert abs(c.trace - 139.72) < 1e-9
        assert abs(c.det - 0.48) < 1e-12
        assert c.orbit_type == "Saddle"
        assert abs(c.eigenvalues[1].real - 139.7165644) < 1e-3

    def test_numeric_oracle_variable_lambda(self, ellipse21, orbits21):
        from billiard_lab.dynamics import VariableDissipation, jacobian

        o = orbits21[0]
        l1, l2 = 0.6, 0.8
        P = ellipse21.perimeter

        def lam_f(s, r):
            s = np.asarray(s, dtype=float)
            # smooth bump: value l1 near s1-bounce, l2 near s2-bounce
            return l1 + (l2 - l1) * np.sin(np.pi * np.mod(s, P) / P) ** 2

        diss = VariableDissipation(lam_f, sup=max(l1, l2))
        lam_at_1 = float(lam_f(o.s1, 0.0))
        lam_at_2 = float(lam_f(o.s2, 0.0))
        J1, _ = jacobian(ellipse21, diss, PhasePoint(o.s1, 0.0))
        J2, _ = jacobian(ellipse21, diss, PhasePoint(o.s2, 0.0))
        M = J2 @ J1
        c = classify_nonconstant(o, lam_at_2, lam_at_1)
        assert abs(np.trace(M) - c.trace) < 1e-4
        assert abs(np.linalg.det(M) - c.det) < 1e-6

    def test_negative_k_undetermined(self, orbits21):
        from dataclasses import replace
        o = replace(orbits21[0], k12=-0.5)
        c = classify_nonconstant(o, 0.3, 0.8)
        assert c.orbit_type == "Undetermined"


class TestLengthHessian:
    def test_major_axis_closed_form(self, orbits21):
        A, verdict = length_hessian(orbits21[0])
        assert np.allclose(A, [[-1.75, 0.25], [0.25, -1.75]], atol=1e-9)
        assert abs(np.linalg.det(A) - 3.0) < 1e-9  # (49 - 1) / 16
        assert verdict == "negative-definite"

    def test_minor_axis_indefinite(self, orbits21):
        A, verdict = length_hessian(orbits21[1])
        assert abs(np.linalg.det(A) - (-0.1875)) < 1e-9  # (0.25 - 1) / 4
        assert verdict == "indefinite"

    def test_det_identity_all_orbits(self, orbits21, perturbed_e03):
        from billiard_lab.orbits import find_two_periodic
        allorbs = list(orbits21) + find_two_periodic(perturbed_e03, 24)
        for o in allorbs:
            detA = np.linalg.det(o.hessian)
            assert abs(detA - (o.k12 - 1.0) / o.tau**2) < 1e-8

    def test_fd_hessian_oracle(self, ellipse21, orbits21):
        # central-difference Hessian of the chord length at the critical pair
        o = orbits21[0]
        h = 1e-5

        def ell(s1, s2):
            pa = ellipse21.position(np.array([s1]))[0]
            pb = ellipse21.position(np.array([s2]))[0]
            return float(np.hypot(*(pb - pa)))

        s1, s2 = o.s1, o.s2
        H = np.zeros((2, 2))
        H[0, 0] = (ell(s1 + h, s2) - 2 * ell(s1, s2) + ell(s1 - h, s2)) / h**2
        H[1, 1] = (ell(s1, s2 + h) - 2 * ell(s1, s2) + ell(s1, s2 - h)) / h**2
        H[0, 1] = H[1, 0] = (
            ell(s1 + h, s2 + h) - ell(s1 + h, s2 - h)
            - ell(s1 - h, s2 + h) + ell(s1 - h, s2 - h)
        ) / (4 * h**2)
        assert np.max(np.abs(H - o.hessian)) < 1e-4


class TestEllipseAudits:
    def test_lyapunov_monotone(self, ellipse21):
        rep = lyapunov_audit(ellipse21, ConstantDissipation(0.5), PhasePoint(1.0, 0.3), 3000)
        assert rep.max_positive_increment < 1e-12
        assert rep.pair_max_positive_increment < 1e-12
        assert rep.steps_to_neutral is not None

    def test_lyapunov_constant_on_minor_orbit(self, ellipse21):
        q = ellipse21.perimeter / 4
        rep = lyapunov_audit(ellipse21, ConstantDissipation(0.5), PhasePoint(q, 0.0), 50)
        assert np.max(np.abs(rep.L - rep.L[0])) < 1e-12

    def test_pair_function_strictly_decreasing_until_near_orbit(self, ellipse21, rng):
        diss = ConstantDissipation(0.5)
        for _ in range(10):
            p = PhasePoint(rng.uniform(0, ellipse21.perimeter), rng.uniform(-0.9, 0.9))
            rep = lyapunov_audit(ellipse21, diss, p, 4000)
            k = rep.steps_to_neutral
            assert k is not None
            dpair = np.diff(rep.L_pair[: max(1, k - 1)])
            assert np.all(dpair < 1e-12)

    def test_confocal_diagnostic(self, ellipse21):
        # -zeta decreasing along dissipative orbits; constant on conservative ones
        rep = lyapunov_audit(ellipse21, ConstantDissipation(0.5),
                             PhasePoint(1.0, 0.3), 500, with_confocal=True)
        assert rep.zeta_max_positive_increment < 1e-10

    def test_confocal_invariant_conservative(self, ellipse21):
        from billiard_lab.dynamics import step_conservative_many
        spec = ellipse21.metadata["spec"]
        s = np.array([1.1]); r = np.array([0.35])
        zs = []
        for _ in range(40):
            x, v = phase_to_xv(ellipse21, s, r)
            zs.append(float(confocal_parameter(spec, x, v)[0]))
            s, r, _ = step_conservative_many(ellipse21, s, r)
        assert np.max(np.abs(np.diff(zs))) < 1e-8

    def test_refuses_non_ellipse(self, oval4):
        with pytest.raises(ValueError):
            lyapunov_audit(oval4, ConstantDissipation(0.5), PhasePoint(0.0, 0.1), 10)

    def test_convergence_labels(self, ellipse21):
        diss = ConstantDissipation(0.5)
        P = ellipse21.perimeter
        lab, k = converge_to_two_periodic(ellipse21, diss, PhasePoint(P / 4, 0.0), 10)
        assert lab == "E" and k == 0
        lab, k = converge_to_two_periodic(ellipse21, diss, PhasePoint(0.0, 0.0), 10)
        assert lab == "H" and k == 0

    def test_random_starts_attracted_mostly_to_E(self, ellipse21, rng):
        diss = ConstantDissipation(0.5)
        labels = []
        for _ in range(60):
            p = PhasePoint(rng.uniform(0, ellipse21.perimeter), rng.uniform(-0.98, 0.98))
            lab, _ = converge_to_two_periodic(ellipse21, diss, p, 20000)
            labels.append(lab)
        assert all(l != "NonConverged" for l in labels)
        assert labels.count("E") / len(labels) >= 0.99
