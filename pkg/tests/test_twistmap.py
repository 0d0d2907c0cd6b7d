"""Map family contract: formulas, inverse, Jacobian, twist, generating data."""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import BrokenTwistMap, random_points
from twistlab.twistmap import (
    LiftedPoint,
    Point,
    StandardMap,
    generating_residual,
    jacobian_fd,
    reduce_angle,
    verify_twist,
)

TWO_PI = 2.0 * math.pi


def test_apply_integrable_shear():
    m = StandardMap(0.0)
    q = m.apply(Point(0.25, 0.5))
    assert q.theta == pytest.approx(0.75, abs=1e-15)
    assert q.r == 0.5


def test_apply_sin_zero():
    q = StandardMap(1.0).apply(Point(0.0, 0.5))
    assert q.theta == pytest.approx(0.5, abs=1e-15)
    assert q.r == 0.5


def test_apply_k2_formula_oracle():
    # Independent step-by-step evaluation of the update rule.
    K, theta, r = 2.0, 0.3, 0.1
    kick = (K / TWO_PI) * math.sin(TWO_PI * theta)
    r_expect = r + kick
    theta_expect = reduce_angle(theta + r_expect)
    q = StandardMap(K).apply(Point(theta, r))
    assert q.r == pytest.approx(r_expect, abs=1e-15)
    assert q.theta == pytest.approx(theta_expect, abs=1e-15)


def test_apply_rejects_non_finite():
    with pytest.raises(ValueError):
        Point(math.nan, 0.0)
    with pytest.raises(ValueError):
        Point(0.1, math.inf)


def test_lift_shear():
    q = StandardMap(0.0).apply_lift(LiftedPoint(1.25, 0.5))
    assert q.theta_lift == pytest.approx(1.75, abs=1e-15)


def test_lift_deck_equivariance():
    m = StandardMap(1.5)
    for p in random_points(50, seed=5):
        a = m.apply_lift(LiftedPoint(p.theta + 1.0, p.r))
        b = m.apply_lift(LiftedPoint(p.theta, p.r))
        assert a.theta_lift - b.theta_lift == pytest.approx(1.0, abs=1e-12)
        assert a.r == pytest.approx(b.r, abs=1e-15)


def test_lift_projection_consistency():
    m = StandardMap(1.5)
    lifted = m.apply_lift(LiftedPoint(0.7, -0.2))
    direct = m.apply(Point(0.7, -0.2))
    assert lifted.project().theta == pytest.approx(direct.theta, abs=1e-12)
    assert lifted.r == pytest.approx(direct.r, abs=1e-15)


def test_inverse_shear():
    q = StandardMap(0.0).inverse(Point(0.75, 0.5))
    assert q.theta == pytest.approx(0.25, abs=1e-15)


def test_inverse_roundtrip_random():
    m = StandardMap(1.7)
    for p in random_points(100, seed=6):
        q = m.inverse(m.apply(p))
        assert q.theta == pytest.approx(p.theta, abs=1e-12)
        assert q.r == pytest.approx(p.r, abs=1e-12)


def test_single_step_roundtrips_chaotic():
    # No long-horizon drift guarantee at K=2 (chaotic); single-step only.
    m = StandardMap(2.0)
    p = Point(0.1, 0.1)
    for _ in range(200):
        p = m.apply(p)
        back = m.apply(m.inverse(p))
        assert back.theta == pytest.approx(p.theta, abs=1e-12)
        assert back.r == pytest.approx(p.r, abs=1e-12)


def test_jacobian_integrable():
    J = StandardMap(0.0).jacobian(Point(0.37, -1.2))
    assert np.allclose(J.as_array(), [[1, 1], [0, 1]])


def test_jacobian_closed_form_k1():
    J = StandardMap(1.0).jacobian(Point(0.0, 0.3))
    assert np.allclose(J.as_array(), [[2, 1], [1, 1]])


def test_jacobian_finite_difference_oracle():
    rng = np.random.default_rng(12)
    for _ in range(50):
        m = StandardMap(float(rng.uniform(0, 4)))
        p = Point(float(rng.uniform(0, 1)), float(rng.uniform(-2, 2)))
        assert np.max(np.abs(m.jacobian(p).as_array() - jacobian_fd(m, p))) < 1e-6


def test_jacobian_det_one():
    for K in (0.0, 0.5, 1.0, 2.0, 5.0):
        m = StandardMap(K)
        for p in random_points(50, seed=int(10 * K) + 1):
            assert abs(m.jacobian(p).det() - 1.0) <= 1e-12


def test_generating_relations_hold():
    for K in (0.0, 1.0, 2.0, 3.7):
        m = StandardMap(K)
        for p in random_points(40, seed=int(K * 7) + 2):
            assert generating_residual(m, p) <= 1e-10


def test_generating_twist_sign():
    m = StandardMap(2.0)
    for theta in np.linspace(0, 1, 17):
        g = m.generating(float(theta), float(theta) + 0.4)
        assert g.d12h < 0.0
        assert g.d12h == -1.0


def test_verify_twist_standard():
    rep = verify_twist(StandardMap(5.0), 10_000)
    assert rep.ok
    assert rep.min_forward == pytest.approx(1.0, abs=1e-12)
    assert rep.min_backward == pytest.approx(1.0, abs=1e-12)


def test_verify_twist_broken_family():
    rep = verify_twist(BrokenTwistMap(), 500)
    assert not rep.ok
    assert rep.witness is not None
    # The witness really does violate the sign condition.
    assert math.cos(2.0 * math.pi * rep.witness.r) <= 0.0


def test_verify_twist_requires_samples():
    with pytest.raises(ValueError):
        verify_twist(StandardMap(1.0), 0)


def test_map_rejects_bad_coupling():
    with pytest.raises(ValueError):
        StandardMap(-1.0)
    with pytest.raises(ValueError):
        StandardMap(math.nan)
