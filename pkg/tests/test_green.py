"""Green slope sequences, limits, matrix identities, dynamical criterion."""

from __future__ import annotations

import math

import numpy as np
import pytest

from twistlab import aubry, green
from twistlab.twistmap import Point, StandardMap


class TestIntegrableClosedForms:
    def test_forward_harmonic(self, map_k0):
        seq = green.slope_sequences(map_k0, Point(0.4, 0.9), 16)
        n = np.arange(1, 17)
        assert np.max(np.abs(seq.forward - 1.0 / n)) <= 1e-12

    def test_single_values(self, map_k0):
        x = Point(0.1, 0.2)
        assert green.slope_forward(map_k0, x, 1) == pytest.approx(1.0, abs=1e-15)
        assert green.slope_forward(map_k0, x, 2) == pytest.approx(0.5, abs=1e-15)
        assert green.slope_forward(map_k0, x, 4) == pytest.approx(0.25, abs=1e-15)
        assert green.slope_backward(map_k0, x, 1) == pytest.approx(-1.0, abs=1e-15)
        assert green.slope_backward(map_k0, x, 3) == pytest.approx(-1 / 3, abs=1e-15)

    def test_backward_below_forward(self, map_k0):
        seq = green.slope_sequences(map_k0, Point(0.7, -0.4), 20)
        assert np.all(seq.backward < seq.forward)


class TestSlopeOracles:
    def test_projective_matches_matrix_product_k2(self, map_k2, orbit_k2_golden):
        traj = orbit_k2_golden.trajectory(map_k2)
        ce = green.cocycle_entries(map_k2, traj, 8)
        # G_8 at x_8 is the image of the vertical at x: second column of M_8.
        s8 = green.slope_forward(map_k2, traj.shifted(8), 8)
        assert s8 == pytest.approx(ce.d_n / ce.b_n, abs=1e-10)

    def test_backward_monotone_k12(self, orbit_k12_1321):
        m = StandardMap(1.2)
        seq = green.slope_sequences(m, orbit_k12_1321.trajectory(m), 64)
        assert np.all(np.diff(seq.backward) > 0.0)


class TestCocycleEntries:
    def test_integrable_entries(self, map_k0):
        for n in (1, 3, 10):
            ce = green.cocycle_entries(map_k0, Point(0.3, 0.3), n)
            assert (ce.a_n, ce.b_n, ce.c_n, ce.d_n) == (1.0, float(n), 0.0, 1.0)
            # d_n = s_n(x_n) b_n reduces to 1 = (1/n) * n.
            assert ce.d_n == pytest.approx((1.0 / n) * ce.b_n, abs=1e-15)

    def test_slope_identities_k15(self, map_k15, orbit_k15_golden):
        traj = orbit_k15_golden.trajectory(map_k15)
        for n in (1, 5, 20):
            ce = green.cocycle_entries(map_k15, traj, n)
            s_n = green.slope_forward(map_k15, traj.shifted(n), n)
            s_mn = green.slope_backward(map_k15, traj, n)
            assert ce.d_n == pytest.approx(s_n * ce.b_n, rel=1e-9)
            assert ce.a_n == pytest.approx(-ce.b_n * s_mn, rel=1e-9)
            assert ce.det_factorwise == pytest.approx(1.0, abs=1e-12)

    def test_nn_det_identity(self, map_k15, orbit_k15_golden):
        traj = orbit_k15_golden.trajectory(map_k15)
        for n in (2, 10, 20):
            assert green.nn_det_identity_residual(map_k15, traj, n) < 1e-9

    def test_integrable_nn_det_closed_form(self, map_k0):
        # 1 = b_n^2 (s_+ - s_{-n})(s_n - s_+) = n^2 (1/n)(1/n) with s_+- = 0.
        for n in (2, 5, 11):
            b = float(n)
            assert b * b * (0.0 + 1.0 / n) * (1.0 / n - 0.0) == pytest.approx(
                1.0, abs=1e-12
            )


class TestGreenLimits:
    def test_integrable_flagged_unconverged(self, map_k0):
        lim = green.green_limits(map_k0, Point(0.2, 0.5), 64, 1e-6)
        assert not lim.converged
        assert lim.n_used == 64
        assert lim.gap == pytest.approx(2.0 / 64.0, abs=1e-12)
        with pytest.raises(green.GreenSetViolation):
            lim.require_converged()

    def test_integrable_harmonic_stopping(self, map_k0):
        # With enough iterations the Cauchy rule fires near n ~ 1/sqrt(tol).
        lim = green.green_limits(map_k0, Point(0.2, 0.5), 1200, 1e-6)
        assert lim.converged
        assert lim.n_used >= 1000
        assert lim.gap == pytest.approx(2.0 / lim.n_used, abs=1e-9)

    def test_hyperbolic_fast_convergence(self, map_k2, orbit_k2_golden):
        traj = orbit_k2_golden.trajectory(map_k2)
        lim = green.green_limits(map_k2, traj, 64, 1e-9)
        assert lim.converged and lim.gap > 1.0
        assert lim.cauchy_residual < 1e-10 or lim.n_used < 64

    def test_near_integrable_small_gap(self, map_k03, orbit_k03_golden):
        traj = orbit_k03_golden.trajectory(map_k03)
        lim = green.green_limits(map_k03, traj, 64, 1e-9)
        # Regression value from the first run: slow 1/n decay, honest flag.
        assert not lim.converged
        assert lim.gap < 0.05

    def test_interlacing_all_points(self, map_k15, orbit_k15_golden):
        worst = -math.inf
        for i in range(orbit_k15_golden.q):
            seq = green.slope_sequences(
                map_k15, orbit_k15_golden.trajectory(map_k15, i), 32
            )
            worst = max(worst, seq.interlacing_violation())
        assert worst <= 1e-12

    def test_uniform_slope_bound(self, map_k15, orbit_k15_golden):
        # Lemma-style bound: |s_{+-n}| never exceeds the first-step slopes.
        bound = -math.inf
        seqs = []
        for i in range(orbit_k15_golden.q):
            seq = green.slope_sequences(
                map_k15, orbit_k15_golden.trajectory(map_k15, i), 32
            )
            seqs.append(seq)
            bound = max(bound, abs(seq.forward[0]), abs(seq.backward[0]))
        for seq in seqs:
            assert np.max(np.abs(seq.forward)) <= bound + 1e-12
            assert np.max(np.abs(seq.backward)) <= bound + 1e-12


class TestGreenSetCheck:
    def test_integrable_passes(self, map_k0):
        rep = green.green_set_check(map_k0, Point(0.5, 0.123), 32, window=4)
        assert rep.ok

    def test_orbit_passes(self, map_k2, orbit_k2_golden):
        rep = green.green_set_check(
            map_k2, orbit_k2_golden.trajectory(map_k2), 32, window=8
        )
        assert rep.ok

    def test_elliptic_region_fails(self):
        # Near the elliptic fixed point (1/2, 0) at K=1 the vertical's
        # image rotates, so a sign condition must break at some n.
        m = StandardMap(1.0)
        rep = green.green_set_check(m, Point(0.51, 0.0), 64, window=1)
        assert not rep.ok
        assert rep.first_violation is not None


class TestInvarianceResidual:
    def test_integrable_tracks_cauchy_residual(self, map_k0):
        # Df sends G_n to G_{n+1} exactly, so the finite-n invariance
        # defect is the Cauchy increment itself (the horizontal limit
        # would give 0, but is out of reach of an unconverged estimate).
        lim = green.green_limits(map_k0, Point(0.3, 0.8), 64, 1e-6)
        res = green.invariance_residual(map_k0, Point(0.3, 0.8), lim, 64, 1e-6)
        assert res <= 2.0 * lim.cauchy_residual

    def test_hyperbolic_small(self, map_k2, orbit_k2_golden):
        traj = orbit_k2_golden.trajectory(map_k2)
        lim = green.green_limits(map_k2, traj, 64, 1e-8)
        assert green.invariance_residual(map_k2, traj, lim, 64, 1e-8) < 1e-6

    def test_monotone_refinement(self, map_k2, orbit_k2_golden):
        traj = orbit_k2_golden.trajectory(map_k2)
        res = []
        for tol in (1e-4, 1e-8):
            lim = green.green_limits(map_k2, traj, 64, tol)
            res.append(green.invariance_residual(map_k2, traj, lim, 64, tol))
        assert res[1] <= res[0]


class TestDynamicalCriterion:
    def test_integrable_vertical_grows(self, map_k0):
        prof = green.dynamical_criterion_test(map_k0, Point(0.1, 0.4), (0, 1), 64)
        assert np.allclose(prof.norms, np.arange(1, 65), atol=1e-9)
        assert prof.classification == "growing"

    def test_integrable_horizontal_bounded(self, map_k0):
        prof = green.dynamical_criterion_test(map_k0, Point(0.1, 0.4), (1, 0), 64)
        assert np.allclose(prof.norms, 1.0, atol=1e-12)
        assert prof.classification == "bounded"

    def test_hyperbolic_split(self, map_k2, orbit_k2_golden):
        traj = orbit_k2_golden.trajectory(map_k2)
        seq = green.slope_sequences(map_k2, traj, 64)
        s_minus = seq.backward[-1]
        off = green.dynamical_criterion_test(map_k2, traj, (1.0, s_minus + 0.1), 80)
        on = green.dynamical_criterion_test(map_k2, traj, (1.0, s_minus), 40)
        assert off.classification == "growing"
        assert np.max(off.norms) > 1e6
        assert on.classification == "bounded"
        assert np.max(on.norms) < 10.0


class TestGrowthBn:
    def test_integrable_linear(self, map_k0):
        bg = green.growth_b_n(map_k0, Point(0.9, 0.1), 32)
        assert np.max(np.abs(bg.b - np.arange(1, 33))) <= 1e-12
        assert bg.log_slope < 0.05  # sublinear in the exponent sense

    def test_hyperbolic_rate_matches_lyapunov(self, map_k2, orbit_k2_golden):
        from twistlab.cocycle import CocycleSource, lyapunov_qr

        traj = orbit_k2_golden.trajectory(map_k2)
        bg = green.growth_b_n(map_k2, traj, 60)
        est = lyapunov_qr(CocycleSource.from_orbit(map_k2, traj), 5000)
        assert bg.log_slope == pytest.approx(est.lam, rel=0.05)

    def test_positive_on_orbit(self, map_k15, orbit_k15_golden):
        bg = green.growth_b_n(map_k15, orbit_k15_golden.trajectory(map_k15), 64)
        assert np.all(bg.b > 0.0)


def test_semicontinuity_proxy(map_k2):
    """s_+ on the finer convergent cloud never exceeds the coarse value
    by more than the summed Cauchy residuals at matched points."""
    from conftest import GOLDEN

    coarse = aubry.am_set_approx(map_k2, GOLDEN, 7)
    fine = aubry.am_set_approx(map_k2, GOLDEN, 8)
    fine_lims = [
        green.green_limits(map_k2, fine.trajectory(map_k2, j)) for j in range(fine.q)
    ]
    fine_pos = np.mod(fine.thetas, 1.0)
    for i in range(coarse.q):
        lim_c = green.green_limits(map_k2, coarse.trajectory(map_k2, i))
        d = np.abs(fine_pos - (coarse.thetas[i] % 1.0))
        j = int(np.argmin(np.minimum(d, 1.0 - d)))
        allowance = lim_c.cauchy_residual + fine_lims[j].cauchy_residual
        gap_theta = float(np.min(np.minimum(d, 1.0 - d)))
        # Matched points are close but not identical; admit a Lipschitz term.
        assert fine_lims[j].s_plus <= lim_c.s_plus + allowance + 5.0 * gap_theta


def test_vertical_transversality_error_names_step():
    m = StandardMap(1.0)
    with pytest.raises(green.GreenSetViolation) as err:
        green.slope_forward(m, Point(0.51, 0.0), 64)
    assert err.value.n is not None
