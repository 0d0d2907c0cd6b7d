"""Action minimization: convergents, minimizers, ordering, orbit assembly."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import GOLDEN
from twistlab import aubry
from twistlab.twistmap import Point, StandardMap


class TestConvergents:
    def test_golden_fibonacci(self):
        res = aubry.convergents(GOLDEN, 8)
        assert [str(f) for f in res.fractions] == [
            "1/2", "2/3", "3/5", "5/8", "8/13", "13/21", "21/34", "34/55",
        ]
        assert not res.rational

    def test_silver_period_two(self):
        res = aubry.convergents(math.sqrt(2.0) - 1.0, 5)
        assert [str(f) for f in res.fractions] == [
            "1/2", "2/5", "5/12", "12/29", "29/70",
        ]

    def test_rational_flagged(self):
        res = aubry.convergents(1.0 / 3.0, 8)
        assert res.rational
        assert res.fractions == (Fraction(1, 3),)

    def test_denominators_increase(self):
        res = aubry.convergents(0.7548776662466927, 10)
        qs = [f.denominator for f in res.fractions]
        assert qs == sorted(qs) and len(set(qs)) == len(qs)

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            aubry.convergents(1.5, 3)
        with pytest.raises(ValueError):
            aubry.convergents(0.5, 0)


class TestAction:
    def test_closed_form_half(self):
        m = StandardMap(0.0)
        cfg = aubry.Configuration(Fraction(1, 2), np.array([0.0, 0.5]))
        assert aubry.action(m, cfg) == pytest.approx(0.25, abs=1e-15)

    def test_fixed_point_zero(self):
        m = StandardMap(0.0)
        cfg = aubry.Configuration(Fraction(0, 1), np.array([0.4321]))
        assert aubry.action(m, cfg) == pytest.approx(0.0, abs=1e-15)

    def test_independent_summation_oracle(self):
        m = StandardMap(1.0)
        cfg = aubry.equispaced(Fraction(1, 2), theta0=0.2)
        t = list(cfg.thetas) + [cfg.thetas[0] + 1.0]
        expected = sum(
            0.5 * (t[i + 1] - t[i]) ** 2
            - (1.0 / (4 * math.pi**2)) * math.cos(2 * math.pi * t[i])
            for i in range(2)
        )
        assert aubry.action(m, cfg) == pytest.approx(expected, abs=1e-12)

    def test_gradient_zero_at_integrable_equispaced(self):
        m = StandardMap(0.0)
        g = aubry.action_gradient(m, aubry.equispaced(Fraction(3, 7), 0.11))
        assert np.max(np.abs(g)) <= 1e-12

    def test_gradient_finite_difference_oracle(self):
        m = StandardMap(1.3)
        rng = np.random.default_rng(3)
        cfg = aubry.equispaced(Fraction(2, 5))
        cfg.thetas = cfg.thetas + 0.05 * rng.standard_normal(5)
        g = aubry.action_gradient(m, cfg)
        h = 1e-6
        for i in range(5):
            up = cfg.thetas.copy()
            dn = cfg.thetas.copy()
            up[i] += h
            dn[i] -= h
            fd = (
                aubry.action(m, aubry.Configuration(cfg.rho, up))
                - aubry.action(m, aubry.Configuration(cfg.rho, dn))
            ) / (2 * h)
            assert g[i] == pytest.approx(fd, abs=1e-6)


class TestMinimize:
    def test_integrable_needs_no_steps(self):
        m = StandardMap(0.0)
        cfg = aubry.minimize_orbit(m, Fraction(3, 7))
        assert cfg.n_iters == 0
        assert cfg.grad_norm <= 1e-11

    def test_both_init_strategies_same_orbit(self):
        m = StandardMap(0.5)
        a = aubry.minimize_orbit(m, Fraction(1, 2), "equispaced")
        b = aubry.minimize_orbit(m, Fraction(1, 2), "continuation")
        assert np.allclose(
            np.sort(np.mod(a.thetas, 1)), np.sort(np.mod(b.thetas, 1)), atol=1e-9
        )
        assert a.grad_norm <= 1e-11 and b.grad_norm <= 1e-11

    def test_period_two_is_a_minimum_not_the_saddle(self):
        # The symmetric configuration (0, 1/2) is a saddle; the minimizer
        # straddles the potential well.
        m = StandardMap(0.5)
        cfg = aubry.minimize_orbit(m, Fraction(1, 2))
        saddle = aubry.Configuration(Fraction(1, 2), np.array([0.0, 0.5]))
        assert aubry.action(m, cfg) < aubry.action(m, saddle)
        lam = aubry.smallest_eigenvalue(aubry.action_hessian(m, cfg))
        assert lam >= -1e-8

    def test_descent_below_equispaced_k2(self, map_k2):
        cfg = aubry.minimize_orbit(map_k2, Fraction(34, 55))
        assert cfg.grad_norm <= 1e-11
        eq = aubry.action(map_k2, aubry.equispaced(Fraction(34, 55)))
        assert aubry.action(map_k2, cfg) <= eq
        orbit = aubry.orbit_points(map_k2, cfg)
        assert aubry.check_ordered(orbit).ok

    def test_hessian_psd_at_minimizer(self, map_k15):
        cfg = aubry.minimize_orbit(map_k15, Fraction(13, 21))
        lam = aubry.smallest_eigenvalue(aubry.action_hessian(map_k15, cfg))
        assert lam >= -1e-8

    def test_fixed_point_q1(self):
        m = StandardMap(1.0)
        cfg = aubry.minimize_orbit(m, Fraction(0, 1))
        # minimizer of -cos sits at the well bottom theta = 0
        assert abs(cfg.thetas[0]) <= 1e-9

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            aubry.minimize_orbit(StandardMap(1.0), Fraction(1, 2), "magic")


class TestOrbitPoints:
    def test_integrable_momenta(self):
        m = StandardMap(0.0)
        orbit = aubry.orbit_points(m, aubry.minimize_orbit(m, Fraction(1, 2)))
        assert np.allclose(orbit.rs, 0.5, atol=1e-15)
        assert orbit.lipschitz_bound == 0.0

    def test_forward_images_close_cyclically(self, orbit_k12_1321):
        assert orbit_k12_1321.closure_residual < 1e-9

    def test_invariance_shift(self, map_k2, orbit_k2_golden):
        orbit = orbit_k2_golden
        for i in (0, 7, 23):
            img = map_k2.apply(Point(orbit.thetas[i], orbit.rs[i]))
            j = (i + 1) % orbit.q
            dt = abs(img.theta - (orbit.thetas[j] % 1.0))
            assert min(dt, 1 - dt) < 1e-9
            assert img.r == pytest.approx(orbit.rs[j], abs=1e-9)


class TestOrdering:
    def test_converged_minimizer_passes(self, orbit_k2_golden):
        assert aubry.check_ordered(orbit_k2_golden).ok

    def test_swapped_pair_fails(self, orbit_k2_golden):
        bad = aubry.OrderedOrbit(
            rho=orbit_k2_golden.rho,
            thetas=orbit_k2_golden.thetas.copy(),
            rs=orbit_k2_golden.rs.copy(),
            lipschitz_bound=orbit_k2_golden.lipschitz_bound,
            closure_residual=orbit_k2_golden.closure_residual,
        )
        bad.thetas[3], bad.thetas[4] = bad.thetas[4], bad.thetas[3]
        cert = aubry.check_ordered(bad)
        assert not cert.ok
        assert cert.witness is not None


class TestRotationNumber:
    def test_integrable_exact(self):
        m = StandardMap(0.0)
        assert aubry.rotation_number_estimate(m, Point(0.2, 0.3), 500) == (
            pytest.approx(0.3, abs=1e-12)
        )

    def test_periodic_orbit_exact(self, orbit_k12_1321):
        m = StandardMap(1.2)
        traj = orbit_k12_1321.trajectory(m)
        est = aubry.rotation_number_estimate(m, traj, 21 * 50)
        assert est == pytest.approx(13.0 / 21.0, abs=1e-12)

    def test_generic_point_self_consistency(self):
        m = StandardMap(0.9)
        p = Point(0.123, 0.618)
        a = aubry.rotation_number_estimate(m, p, 100_000)
        b = aubry.rotation_number_estimate(m, p, 200_000)
        assert abs(a - b) < 1e-3


class TestAmSetApprox:
    def test_integrable_on_line(self, map_k0):
        orbit = aubry.am_set_approx(map_k0, GOLDEN, 8)
        assert orbit.q == 55
        assert np.allclose(orbit.rs, 34.0 / 55.0, atol=1e-12)

    def test_hausdorff_decreasing_in_depth(self):
        m = StandardMap(0.5)
        d7 = aubry.am_set_approx(m, GOLDEN, 7)
        d8 = aubry.am_set_approx(m, GOLDEN, 8)
        assert d8.hausdorff_proxy < d7.hausdorff_proxy

    def test_cantor_gap_signature_k2(self, map_k2, orbit_k2_golden):
        # Max theta-gap stays macroscopic as the approximation deepens.
        d7 = aubry.am_set_approx(map_k2, GOLDEN, 7)
        assert orbit_k2_golden.max_theta_gap > 0.05
        assert orbit_k2_golden.max_theta_gap > 0.5 * d7.max_theta_gap

    def test_rational_value_rejected(self, map_k2):
        with pytest.raises(ValueError):
            aubry.am_set_approx(map_k2, 0.25, 5)

    def test_depth_floor(self, map_k2):
        with pytest.raises(ValueError):
            aubry.am_set_approx(map_k2, GOLDEN, 2)


def test_mather_weights(orbit_k2_golden):
    mu = aubry.MatherMeasureApprox(orbit_k2_golden)
    assert mu.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert mu.invariance_defect() == 0.0


def test_smallest_eigenvalue_bisection_matches_eigh():
    rng = np.random.default_rng(8)
    for _ in range(10):
        A = rng.standard_normal((12, 12))
        H = 0.5 * (A + A.T)
        exact = float(np.linalg.eigvalsh(H)[0])
        assert aubry.smallest_eigenvalue(H, tol=1e-11) == pytest.approx(
            exact, abs=1e-9
        )
