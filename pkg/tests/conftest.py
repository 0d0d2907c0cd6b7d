"""Shared fixtures: maps, orbits, and broken-map negative controls.

Orbit computations are session-scoped; they are pure and deterministic,
so sharing them across test modules only saves time.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from twistlab import aubry
from twistlab.twistmap import Jacobian, Point, StandardMap, TwistMap

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class BrokenTwistMap(TwistMap):
    """Fixture violating the twist condition: d(theta')/dr = cos(2 pi r)."""

    family = "broken-twist"

    def __init__(self, K: float = 0.0):
        self.K = K

    def apply(self, p: Point) -> Point:
        two_pi = 2.0 * math.pi
        return Point(p.theta + math.sin(two_pi * p.r) / two_pi, p.r)

    def inverse(self, p: Point) -> Point:
        two_pi = 2.0 * math.pi
        return Point(p.theta - math.sin(two_pi * p.r) / two_pi, p.r)

    def jacobian(self, p: Point) -> Jacobian:
        return Jacobian(1.0, math.cos(2.0 * math.pi * p.r), 0.0, 1.0)


class BrokenDetMap(StandardMap):
    """Fixture violating area preservation (det Df = 1.01)."""

    family = "broken-det"

    def jacobian(self, p: Point) -> Jacobian:
        j = super().jacobian(p)
        return Jacobian(j.a * 1.01, j.b, j.c, j.d)


@pytest.fixture(scope="session")
def map_k2() -> StandardMap:
    return StandardMap(2.0)


@pytest.fixture(scope="session")
def map_k15() -> StandardMap:
    return StandardMap(1.5)


@pytest.fixture(scope="session")
def map_k03() -> StandardMap:
    return StandardMap(0.3)


@pytest.fixture(scope="session")
def map_k0() -> StandardMap:
    return StandardMap(0.0)


@pytest.fixture(scope="session")
def orbit_k2_golden(map_k2):
    return aubry.am_set_approx(map_k2, GOLDEN, 8)


@pytest.fixture(scope="session")
def orbit_k15_golden(map_k15):
    return aubry.orbit_points(map_k15, aubry.minimize_orbit(map_k15, Fraction(34, 55)))


@pytest.fixture(scope="session")
def orbit_k03_golden(map_k03):
    return aubry.am_set_approx(map_k03, GOLDEN, 8)


@pytest.fixture(scope="session")
def orbit_k12_1321():
    m = StandardMap(1.2)
    return aubry.orbit_points(m, aubry.minimize_orbit(m, Fraction(13, 21)))


@pytest.fixture(scope="session")
def orbit_k0_golden(map_k0):
    return aubry.orbit_points(map_k0, aubry.minimize_orbit(map_k0, Fraction(34, 55)))


def random_points(n: int, seed: int = 0, r_range=(-2.0, 2.0)):
    rng = np.random.default_rng(seed)
    return [
        Point(float(rng.uniform(0, 1)), float(rng.uniform(*r_range)))
        for _ in range(n)
    ]
