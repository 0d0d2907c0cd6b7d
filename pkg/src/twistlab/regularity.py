"""Multiscale secant cones of orbit point clouds.

The tangent-cone estimator collects secant slopes between cloud points
near a base point over a geometric ladder of scales, hulls them per
scale, and extrapolates from the two finest populated rungs.  Narrow
cones mean the cloud looks differentiable at the point; cones containing
two separated directions are the hyperbolic signature.

Angle differences are always taken through the representative of the
difference vector with theta-component in [-1/2, 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .green import GreenLimits
from .twistmap import Point

DEFAULT_SCALE_TOP = 0.1
DEFAULT_N_SCALES = 6
REGULAR_WIDTH_RAD = 0.02


class SparseCloudError(RuntimeError):
    """Too few populated scales at a base point; deepen the convergent
    rather than widening the scale window (widening biases the cone)."""


def default_scales(
    top: float = DEFAULT_SCALE_TOP, n: int = DEFAULT_N_SCALES
) -> np.ndarray:
    return top * 0.5 ** np.arange(n)


def wrap_diff(dtheta) -> np.ndarray:
    """Angle differences reduced to [-1/2, 1/2)."""
    return np.mod(np.asarray(dtheta) + 0.5, 1.0) - 0.5


@dataclass
class PointCloud:
    """Finite graph-like point set (thetas mod 1, momenta)."""

    thetas: np.ndarray
    rs: np.ndarray

    def __post_init__(self) -> None:
        self.thetas = np.mod(np.asarray(self.thetas, dtype=float), 1.0)
        self.rs = np.asarray(self.rs, dtype=float)
        if len(self.thetas) != len(self.rs):
            raise ValueError("thetas and rs must have equal length")

    def __len__(self) -> int:
        return len(self.thetas)

    @classmethod
    def from_orbit(cls, orbit) -> "PointCloud":
        return cls(orbit.thetas.copy(), orbit.rs.copy())

    @classmethod
    def union(cls, orbits) -> "PointCloud":
        return cls(
            np.concatenate([np.mod(o.thetas, 1.0) for o in orbits]),
            np.concatenate([o.rs for o in orbits]),
        )

    def point(self, i: int) -> Point:
        return Point(self.thetas[i], self.rs[i])


def secant_slopes(
    cloud: PointCloud, x: Point, s_min: float, s_max: float
) -> np.ndarray:
    """Slopes of secants between cloud pairs near x.

    Both endpoints must lie within s_max of x and the pair separation
    must be at least s_min.  Empty result means no qualifying pairs.
    """
    if not s_min < s_max:
        raise ValueError("need s_min < s_max")
    dt = wrap_diff(cloud.thetas - x.theta)
    dr = cloud.rs - x.r
    near = np.hypot(dt, dr) <= s_max
    idx = np.nonzero(near)[0]
    if len(idx) < 2:
        return np.empty(0)
    t = cloud.thetas[idx]
    r = cloud.rs[idx]
    dth = wrap_diff(t[:, None] - t[None, :])
    drr = r[:, None] - r[None, :]
    sep = np.hypot(dth, drr)
    iu = np.triu_indices(len(idx), k=1)
    ok = (sep[iu] >= s_min) & (np.abs(dth[iu]) > 0.0)
    return (drr[iu][ok] / dth[iu][ok]).astype(float)


@dataclass
class ConeEstimate:
    """Per-scale slope hulls and the two-finest-rung extrapolation."""

    base: Point
    per_scale: list[tuple[float, float, float]]  # (scale, lo, hi); hulls
    lo: float
    hi: float
    angular_width: float

    @property
    def slope_interval(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def cone_estimate(
    cloud: PointCloud, x: Point, scales=None
) -> ConeEstimate:
    """Secant cone of the cloud at x over a geometric scale ladder.

    Rung at scale s pairs points within s of x separated by at least
    s/2.  The reported cone is the hull of the two finest non-empty
    rungs; per-scale hulls are kept so callers can re-extrapolate.
    """
    scales = default_scales() if scales is None else np.asarray(scales, float)
    if len(scales) < 3:
        raise ValueError("scale ladder needs >= 3 rungs")
    per_scale: list[tuple[float, float, float]] = []
    populated: list[tuple[float, float, float]] = []
    for s in scales:
        slopes = secant_slopes(cloud, x, 0.5 * s, s)
        if len(slopes) == 0:
            continue
        entry = (float(s), float(np.min(slopes)), float(np.max(slopes)))
        per_scale.append(entry)
        populated.append(entry)
    if len(populated) < 2:
        raise SparseCloudError(
            f"only {len(populated)} populated scales at theta={x.theta:.6f};"
            " cloud too sparse, deepen the convergent"
        )
    finest = populated[-2:]
    lo = min(e[1] for e in finest)
    hi = max(e[2] for e in finest)
    width = math.atan(hi) - math.atan(lo)
    return ConeEstimate(x, per_scale, lo, hi, width)


@dataclass(frozen=True)
class ContainmentVerdict:
    contained: bool
    lo_excess: float  # how far the cone pokes below s_minus - delta
    hi_excess: float


def cone_vs_green(
    cone: ConeEstimate, limits: GreenLimits, delta: float
) -> ContainmentVerdict:
    """Check [lo, hi] subset of [s_minus - delta, s_plus + delta]."""
    lo_excess = max(0.0, (limits.s_minus - delta) - cone.lo)
    hi_excess = max(0.0, cone.hi - (limits.s_plus + delta))
    return ContainmentVerdict(lo_excess == 0.0 and hi_excess == 0.0,
                              lo_excess, hi_excess)


def hyperbolic_cone_check(
    cloud: PointCloud,
    green_table: list[GreenLimits],
    delta: float | None = None,
    delta_factor: float = 0.1,
    s_max: float = DEFAULT_SCALE_TOP,
    gap_floor_factor: float = 10.0,
) -> float | None:
    """Fraction of base points whose secants approach both Green slopes.

    A point counts when its secant sample contains slopes within delta
    of s_minus and of s_plus (delta defaults to delta_factor * gap).
    Points whose gap is not resolved above the Cauchy residual are
    skipped; returns None when every point is skipped (gap ~ 0 regime).
    """
    if len(green_table) != len(cloud):
        raise ValueError("green_table must be parallel to the cloud")
    hits = 0
    used = 0
    for i, lim in enumerate(green_table):
        if not lim.converged or lim.gap <= gap_floor_factor * max(
            lim.cauchy_residual, 1e-15
        ):
            continue
        used += 1
        d = delta_factor * lim.gap if delta is None else delta
        slopes = secant_slopes(cloud, cloud.point(i), 0.0, s_max)
        if len(slopes) == 0:
            continue
        near_minus = np.any(np.abs(slopes - lim.s_minus) <= d)
        near_plus = np.any(np.abs(slopes - lim.s_plus) <= d)
        if near_minus and near_plus:
            hits += 1
    if used == 0:
        return None
    return hits / used


@dataclass(frozen=True)
class UnitaryCone:
    """Antipodally symmetric arcs covering the cone's directions."""

    angle_lo: float
    angle_hi: float

    @property
    def width(self) -> float:
        return self.angle_hi - self.angle_lo

    def arcs(self) -> list[tuple[float, float]]:
        return [
            (self.angle_lo, self.angle_hi),
            (self.angle_lo + math.pi, self.angle_hi + math.pi),
        ]

    def directions(self) -> np.ndarray:
        mid = 0.5 * (self.angle_lo + self.angle_hi)
        u = np.array([math.cos(mid), math.sin(mid)])
        return np.stack([u, -u])


def unitary_cone(cone: ConeEstimate) -> UnitaryCone:
    """Trace of the slope cone on the unit circle (plus its antipode)."""
    return UnitaryCone(math.atan(cone.lo), math.atan(cone.hi))


@dataclass
class RegularityReport:
    widths: np.ndarray  # nan where the cone could not be estimated
    regular_fraction: float
    containment_fraction: float | None
    two_direction_fraction: float | None
    n_sparse: int

    @property
    def max_width(self) -> float:
        w = self.widths[np.isfinite(self.widths)]
        return float(np.max(w)) if len(w) else math.nan

    @property
    def median_width(self) -> float:
        w = self.widths[np.isfinite(self.widths)]
        return float(np.median(w)) if len(w) else math.nan


def regularity_report(
    cloud: PointCloud,
    green_table: list[GreenLimits],
    scales=None,
    width_threshold: float = REGULAR_WIDTH_RAD,
    containment_delta: float | None = None,
    two_direction_delta_factor: float = 0.1,
) -> RegularityReport:
    """Per-point cone survey: widths, regular/containment/two-direction scores.

    containment_delta defaults to max(0.05 * gap, 0.02) per point, which
    stays meaningful when the gap estimate is itself near zero.
    """
    n = len(cloud)
    widths = np.full(n, math.nan)
    regular = 0
    contained = 0
    containment_used = 0
    sparse = 0
    for i in range(n):
        try:
            cone = cone_estimate(cloud, cloud.point(i), scales)
        except SparseCloudError:
            sparse += 1
            continue
        widths[i] = cone.angular_width
        if cone.angular_width < width_threshold:
            regular += 1
        lim = green_table[i]
        delta = (
            max(0.05 * lim.gap, 0.02)
            if containment_delta is None
            else containment_delta
        )
        containment_used += 1
        if cone_vs_green(cone, lim, delta).contained:
            contained += 1
    estimated = n - sparse
    two_dir = hyperbolic_cone_check(
        cloud, green_table, delta_factor=two_direction_delta_factor
    )
    return RegularityReport(
        widths=widths,
        regular_fraction=regular / estimated if estimated else math.nan,
        containment_fraction=(
            contained / containment_used if containment_used else None
        ),
        two_direction_fraction=two_dir,
        n_sparse=sparse,
    )
