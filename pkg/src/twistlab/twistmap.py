"""Exact symplectic positive twist maps of the annulus A = T x R.

Ships the Chirikov standard map in unit-period coordinates,

    theta' = theta + r + (K/2pi) sin(2pi theta)   (mod 1)
    r'     = r + (K/2pi) sin(2pi theta)

together with its lift, inverse, Jacobian and the discrete generating
function h(theta, theta') = (theta'-theta)^2/2 - (K/4pi^2) cos(2pi theta)
whose partials recover the momenta: r = -d1h, r' = d2h.

The map abstraction is family-agnostic: any class providing apply /
inverse / jacobian / generating can be used by the rest of the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Double-precision headroom; overridable per call where it matters.
TOL_DET = 1e-12
TOL_GEN = 1e-10
TOL_ROUNDTRIP = 1e-12


def reduce_angle(theta: float) -> float:
    """Floor-based reduction of an angle into [0, 1)."""
    return theta - math.floor(theta)


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite coordinate: {v!r}")


@dataclass(frozen=True)
class Point:
    """Annulus point (theta, r); theta stored reduced mod 1, r real."""

    theta: float
    r: float

    def __post_init__(self) -> None:
        _require_finite(self.theta, self.r)
        object.__setattr__(self, "theta", reduce_angle(self.theta))


@dataclass(frozen=True)
class LiftedPoint:
    """Point of the universal cover R^2; theta_lift is never reduced."""

    theta_lift: float
    r: float

    def __post_init__(self) -> None:
        _require_finite(self.theta_lift, self.r)

    def project(self) -> Point:
        return Point(reduce_angle(self.theta_lift), self.r)


@dataclass(frozen=True)
class Jacobian:
    """2x2 derivative matrix [[a, b], [c, d]] in (theta, r) coordinates."""

    a: float
    b: float
    c: float
    d: float

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def inv(self) -> "Jacobian":
        # Symplectic inverse; assumes det = 1.
        return Jacobian(self.d, -self.b, -self.c, self.a)


@dataclass(frozen=True)
class GeneratingEval:
    """Value and partials of the generating function at (theta, theta')."""

    h: float
    d1h: float
    d2h: float
    d11h: float
    d12h: float
    d22h: float


class TwistMap:
    """Interface expected from a map family by the rest of the package."""

    family: str = "abstract"

    def apply(self, p: Point) -> Point:
        raise NotImplementedError

    def apply_lift(self, p: LiftedPoint) -> LiftedPoint:
        raise NotImplementedError

    def inverse(self, p: Point) -> Point:
        raise NotImplementedError

    def jacobian(self, p: Point) -> Jacobian:
        raise NotImplementedError

    def generating(self, theta: float, theta_next: float) -> GeneratingEval:
        raise NotImplementedError

    def jacobian_inverse(self, p: Point) -> Jacobian:
        """Derivative of f^-1 at p, i.e. Df(f^-1 p)^-1."""
        return self.jacobian(self.inverse(p)).inv()


class StandardMap(TwistMap):
    """Chirikov standard map with coupling K >= 0 (K = 0 is the shear)."""

    family = "standard"

    def __init__(self, K: float):
        if not math.isfinite(K) or K < 0:
            raise ValueError(f"coupling K must be finite and >= 0, got {K!r}")
        self.K = float(K)

    def __repr__(self) -> str:
        return f"StandardMap(K={self.K!r})"

    def _kick(self, theta: float) -> float:
        # Evaluated on the reduced angle so the lift commutes with the
        # deck transformation exactly in floating point.
        return (self.K / TWO_PI) * math.sin(TWO_PI * reduce_angle(theta))

    def apply(self, p: Point) -> Point:
        kick = self._kick(p.theta)
        r_new = p.r + kick
        return Point(p.theta + r_new, r_new)

    def apply_lift(self, p: LiftedPoint) -> LiftedPoint:
        kick = self._kick(p.theta_lift)
        r_new = p.r + kick
        return LiftedPoint(p.theta_lift + r_new, r_new)

    def inverse(self, p: Point) -> Point:
        theta_prev = reduce_angle(p.theta - p.r)
        return Point(theta_prev, p.r - self._kick(theta_prev))

    def jacobian(self, p: Point) -> Jacobian:
        kc = self.K * math.cos(TWO_PI * p.theta)
        return Jacobian(1.0 + kc, 1.0, kc, 1.0)

    def generating(self, theta: float, theta_next: float) -> GeneratingEval:
        d = theta_next - theta
        s = math.sin(TWO_PI * theta)
        c = math.cos(TWO_PI * theta)
        amp = self.K / (TWO_PI * TWO_PI)
        return GeneratingEval(
            h=0.5 * d * d - amp * c,
            d1h=-d + (self.K / TWO_PI) * s,
            d2h=d,
            d11h=1.0 + self.K * c,
            d12h=-1.0,
            d22h=1.0,
        )


@dataclass(frozen=True)
class TwistReport:
    """Sampled verification of the positive-twist property."""

    n_samples: int
    min_forward: float
    min_backward: float
    witness: Point | None

    @property
    def ok(self) -> bool:
        return self.witness is None


def verify_twist(
    m: TwistMap,
    n_samples: int,
    r_range: tuple[float, float] = (-3.0, 3.0),
    seed: int = 0,
) -> TwistReport:
    """Sample d(pi o f)/dr and -d(pi o f^-1)/dr; both must stay positive.

    Returns the minima over the sample and, on a violation, the first
    witnessing point.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    min_fwd = math.inf
    min_bwd = math.inf
    witness = None
    for _ in range(n_samples):
        p = Point(float(rng.uniform(0.0, 1.0)), float(rng.uniform(*r_range)))
        fwd = m.jacobian(p).b
        # d(pi o f^-1)/dr at p is the (0,1) entry of Df(f^-1 p)^-1 = -b.
        bwd = m.jacobian(m.inverse(p)).b
        min_fwd = min(min_fwd, fwd)
        min_bwd = min(min_bwd, bwd)
        if (fwd <= 0 or bwd <= 0) and witness is None:
            witness = p
    return TwistReport(n_samples, min_fwd, min_bwd, witness)


def generating_residual(m: TwistMap, p: Point) -> float:
    """Max deviation of one applied step from r = -d1h, r' = d2h."""
    lifted = m.apply_lift(LiftedPoint(p.theta, p.r))
    g = m.generating(p.theta, lifted.theta_lift)
    return max(abs(p.r + g.d1h), abs(lifted.r - g.d2h))


def jacobian_fd(m: TwistMap, p: Point, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of the lifted map; oracle for jacobian()."""
    base = LiftedPoint(p.theta, p.r)

    def shift(dt: float, dr: float) -> LiftedPoint:
        return LiftedPoint(base.theta_lift + dt, base.r + dr)

    cols = []
    for dt, dr in ((step, 0.0), (0.0, step)):
        hi = m.apply_lift(shift(dt, dr))
        lo = m.apply_lift(shift(-dt, -dr))
        cols.append(
            [
                (hi.theta_lift - lo.theta_lift) / (2 * step),
                (hi.r - lo.r) / (2 * step),
            ]
        )
    return np.array(cols).T
