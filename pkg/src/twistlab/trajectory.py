"""Orbit access for tangent-cocycle computations.

Green slopes, Lyapunov estimates and rotation numbers all consume the
orbit of a base point through f. Two providers are supported:

* ``MapTrajectory`` iterates the map from a raw point (cached).
* ``OrbitTrajectory`` indexes a stored periodic minimizing orbit.

The second one matters numerically: re-iterating the map from a point of
a hyperbolic orbit drifts off the invariant set like eps * exp(lambda*n),
which corrupts every slope past n ~ 30.  Index arithmetic on the stored
configuration keeps the cocycle on the orbit for arbitrary n.
"""

from __future__ import annotations

import numpy as np

from .twistmap import LiftedPoint, Point, TwistMap


class Trajectory:
    """Two-sided orbit of a base point; k ranges over all of Z."""

    m: TwistMap

    def point(self, k: int) -> Point:
        raise NotImplementedError

    def lifted_theta(self, k: int) -> float:
        raise NotImplementedError

    def jacobian_at(self, k: int) -> np.ndarray:
        """Df as a 2x2 array at the k-th orbit point."""
        return self.m.jacobian(self.point(k)).as_array()

    def shifted(self, k: int) -> "Trajectory":
        """Trajectory rebased at the k-th orbit point."""
        raise NotImplementedError


class MapTrajectory(Trajectory):
    """Orbit obtained by iterating the map from a raw point."""

    def __init__(self, m: TwistMap, x: Point):
        self.m = m
        self.base = x
        self._fwd: list[Point] = [x]
        self._bwd: list[Point] = [x]
        self._lift: list[LiftedPoint] = [LiftedPoint(x.theta, x.r)]

    def point(self, k: int) -> Point:
        if k >= 0:
            while len(self._fwd) <= k:
                self._fwd.append(self.m.apply(self._fwd[-1]))
            return self._fwd[k]
        while len(self._bwd) <= -k:
            self._bwd.append(self.m.inverse(self._bwd[-1]))
        return self._bwd[-k]

    def lifted_theta(self, k: int) -> float:
        if k < 0:
            raise ValueError("lifted angles are tracked forward only")
        while len(self._lift) <= k:
            self._lift.append(self.m.apply_lift(self._lift[-1]))
        return self._lift[k].theta_lift

    def shifted(self, k: int) -> "MapTrajectory":
        return MapTrajectory(self.m, self.point(k))


class OrbitTrajectory(Trajectory):
    """Periodic orbit trajectory backed by a stored configuration.

    ``thetas`` is the lifted configuration with theta_{i+q} = theta_i + p;
    momenta ``rs`` must satisfy f(point_i) = point_{i+1} up to the orbit's
    closure residual.
    """

    def __init__(self, m: TwistMap, thetas, rs, p: int, base_index: int = 0):
        self.m = m
        self.thetas = np.asarray(thetas, dtype=float)
        self.rs = np.asarray(rs, dtype=float)
        self.p = int(p)
        self.q = len(self.thetas)
        self.base_index = int(base_index)
        if len(self.rs) != self.q:
            raise ValueError("thetas and rs must have equal length")

    def point(self, k: int) -> Point:
        idx = (self.base_index + k) % self.q
        return Point(self.thetas[idx], self.rs[idx])

    def lifted_theta(self, k: int) -> float:
        j = self.base_index + k
        return self.thetas[j % self.q] + self.p * (j // self.q)

    def shifted(self, k: int) -> "OrbitTrajectory":
        return OrbitTrajectory(
            self.m, self.thetas, self.rs, self.p, self.base_index + k
        )


def as_trajectory(m: TwistMap, x) -> Trajectory:
    """Coerce a Point or ready-made trajectory into a Trajectory."""
    if isinstance(x, Trajectory):
        return x
    if isinstance(x, Point):
        return MapTrajectory(m, x)
    raise TypeError(f"expected Point or Trajectory, got {type(x).__name__}")
