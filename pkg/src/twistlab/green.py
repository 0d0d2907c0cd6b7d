"""Green bundle slope sequences and their limits along orbits.

The n-step image of the vertical, pulled from f^{-n}(x) forward to x,
has a slope s_n(x); the backward analogue gives s_{-n}(x).  On points of
the Green set the forward sequence decreases strictly, the backward one
increases strictly, they interlace, and their limits s_+ >= s_- bound
every tangent object of interest.  The transversality gap s_+ - s_- is
the hyperbolicity diagnostic used everywhere else in the package.

All slopes are computed by projective single-step iteration with
per-step normalization; raw n-step matrix products are kept only as a
small-n oracle (`cocycle_entries`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trajectory import Trajectory, as_trajectory
from .twistmap import Point, TwistMap

TOL_CAUCHY = 1e-9
N_MAX = 64
INTERLACE_MARGIN = 1e-12
MONOTONE_TOL = 1e-10
VERTICAL_SLOPE = 1e6


class GreenSetViolation(RuntimeError):
    """Sign/monotonicity condition failed: point is outside the Green set
    (or the computed orbit has left the invariant set numerically)."""

    def __init__(self, message: str, n: int | None = None, k: int | None = None):
        super().__init__(message)
        self.n = n
        self.k = k


@dataclass(frozen=True)
class ProjLine:
    """Line of the tangent plane; slope None encodes the vertical."""

    slope: float | None

    @classmethod
    def from_direction(cls, v) -> "ProjLine":
        vt, vr = float(v[0]), float(v[1])
        if vt == 0.0:
            return cls(None)
        return cls(vr / vt)

    @property
    def angle(self) -> float:
        """Representative angle in [0, pi)."""
        if self.slope is None:
            return 0.5 * math.pi
        return math.atan2(self.slope, 1.0) % math.pi

    def direction(self) -> np.ndarray:
        a = self.angle
        return np.array([math.cos(a), math.sin(a)])


def line_angle_distance(a: float, b: float) -> float:
    """Distance between line angles, mod pi."""
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def slope_angle_distance(s1: float, s2: float) -> float:
    return line_angle_distance(math.atan(s1), math.atan(s2))


def _normalize_columns(carried: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(carried, axis=0)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise GreenSetViolation("tangent direction collapsed or overflowed")
    return carried / norms


@dataclass
class GreenSequence:
    """Forward slopes s_1..s_N and backward slopes s_{-1}..s_{-N} at a point."""

    base: Point
    forward: np.ndarray
    backward: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.forward)

    def interlacing_violation(self, margin: float = INTERLACE_MARGIN) -> float:
        """Worst violation of strict interlacing; <= margin means accepted.

        Checks s_{-n} < s_{-(n+1)}, s_{n+1} < s_n for every n, and the
        cross inequality s_{-N} < s_N.
        """
        worst = 0.0
        worst = max(worst, float(np.max(np.diff(self.forward), initial=-np.inf)))
        worst = max(worst, float(np.max(-np.diff(self.backward), initial=-np.inf)))
        worst = max(worst, self.backward[-1] - self.forward[-1])
        return worst


def _forward_slopes(traj: Trajectory, n_max: int) -> np.ndarray:
    """All s_n(x), n = 1..n_max, via one pass along the backward orbit.

    Verticals are seeded at f^{-j}(x) and pushed forward together; each
    step multiplies the whole carried bundle by one Jacobian, so the
    triangular computation vectorizes.
    """
    carried = np.zeros((2, 0))
    for j in range(n_max, 0, -1):
        carried = np.hstack([carried, [[0.0], [1.0]]])
        carried = traj.jacobian_at(-j) @ carried
        if np.any(carried[0] <= 0.0):
            n_bad = n_max - int(np.argmax(carried[0] <= 0.0))
            raise GreenSetViolation(
                f"forward vertical image lost transversality at n={n_bad}",
                n=n_bad,
            )
        carried = _normalize_columns(carried)
    # Column k was seeded at depth n_max - k.
    slopes = carried[1] / carried[0]
    return slopes[::-1].copy()


def _backward_slopes(traj: Trajectory, n_max: int) -> np.ndarray:
    """All s_{-n}(x): verticals at f^{j}(x) pulled back to x."""
    carried = np.zeros((2, 0))
    for j in range(n_max, 0, -1):
        carried = np.hstack([carried, [[0.0], [1.0]]])
        jac = traj.jacobian_at(j - 1)
        inv = np.array([[jac[1, 1], -jac[0, 1]], [-jac[1, 0], jac[0, 0]]])
        carried = inv @ carried
        if np.any(carried[0] >= 0.0):
            n_bad = n_max - int(np.argmax(carried[0] >= 0.0))
            raise GreenSetViolation(
                f"backward vertical image lost transversality at n={n_bad}",
                n=n_bad,
            )
        carried = _normalize_columns(carried)
    slopes = carried[1] / carried[0]
    return slopes[::-1].copy()


def slope_sequences(m: TwistMap, x, n_max: int = N_MAX) -> GreenSequence:
    """Forward and backward Green slope sequences at x (Point or Trajectory)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    traj = as_trajectory(m, x)
    return GreenSequence(
        base=traj.point(0),
        forward=_forward_slopes(traj, n_max),
        backward=_backward_slopes(traj, n_max),
    )


def slope_forward(m: TwistMap, x, n: int) -> float:
    """Slope of Df^n(f^{-n} x) applied to the vertical at f^{-n}(x)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = as_trajectory(m, x)
    v = np.array([0.0, 1.0])
    for j in range(n, 0, -1):
        v = traj.jacobian_at(-j) @ v
        if v[0] <= 0.0:
            raise GreenSetViolation(
                f"forward vertical image lost transversality at n={n - j + 1}",
                n=n - j + 1,
            )
        v /= np.linalg.norm(v)
    return float(v[1] / v[0])


def slope_backward(m: TwistMap, x, n: int) -> float:
    """Slope of Df^{-n}(f^{n} x) applied to the vertical at f^{n}(x)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = as_trajectory(m, x)
    v = np.array([0.0, 1.0])
    for j in range(n, 0, -1):
        jac = traj.jacobian_at(j - 1)
        inv = np.array([[jac[1, 1], -jac[0, 1]], [-jac[1, 0], jac[0, 0]]])
        v = inv @ v
        if v[0] >= 0.0:
            raise GreenSetViolation(
                f"backward vertical image lost transversality at n={n - j + 1}",
                n=n - j + 1,
            )
        v /= np.linalg.norm(v)
    return float(v[1] / v[0])


@dataclass(frozen=True)
class CocycleEntries:
    """Entries of the n-step Jacobian M_n = [[a_n, b_n], [c_n, d_n]]."""

    a_n: float
    b_n: float
    c_n: float
    d_n: float
    det_factorwise: float = 1.0

    def det(self) -> float:
        return self.a_n * self.d_n - self.b_n * self.c_n

    def as_array(self) -> np.ndarray:
        return np.array([[self.a_n, self.b_n], [self.c_n, self.d_n]])


def cocycle_entries(m: TwistMap, x, n: int) -> CocycleEntries:
    """Raw n-step Jacobian product (small-n oracle; no renormalization).

    The raw entry determinant a*d - b*c loses exp(2*lambda*n) digits to
    cancellation; `det_factorwise` carries the stable value (product of
    the one-step determinants, exact in real arithmetic).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = as_trajectory(m, x)
    M = np.eye(2)
    det_fw = 1.0
    for k in range(n):
        J = traj.jacobian_at(k)
        det_fw *= J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        M = J @ M
    entries = CocycleEntries(M[0, 0], M[0, 1], M[1, 0], M[1, 1], det_fw)
    if entries.b_n <= 0.0:
        raise GreenSetViolation(
            f"b_n = {entries.b_n} <= 0 at n={n}: Green-set sign condition fails",
            n=n,
        )
    return entries


def nn_det_identity_residual(
    m: TwistMap,
    x,
    n: int,
    s_plus_seq: np.ndarray | None = None,
    n_ref: int = N_MAX,
) -> float:
    """Residual of b_n^2 (s_+(x) - s_{-n}(x)) (s_n(x_n) - s_+(x_n)) = 1.

    The last factor decays like exp(-2 lambda n) and is destroyed by
    direct subtraction, so it is propagated multiplicatively: a slope
    difference maps under Df to (t1 - t2) / ((a + b t1)(a + b t2)).
    All three factors are combined in log space.  s_+ along the orbit is
    taken from depth-n_ref forward slopes (noise-floor accuracy on
    hyperbolic orbits).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = as_trajectory(m, x)
    # s_+ estimates at x_0..x_n from the deepest forward slopes.
    s_plus = [
        slope_forward(m, traj.shifted(k), n_ref) for k in range(n + 1)
    ] if s_plus_seq is None else list(s_plus_seq)
    # log b_n and the vertical's slope images s_k(x_k).
    w = np.array([0.0, 1.0])
    log_scale = 0.0
    slope_here = None
    log_delta = None
    sign_delta = 1.0
    for k in range(n):
        J = traj.jacobian_at(k)
        if slope_here is not None:
            # One-step multiplicative evolution of s_k(x_k) - s_+(x_k).
            da = (J[0, 0] + J[0, 1] * slope_here) * (J[0, 0] + J[0, 1] * s_plus[k])
            log_delta -= math.log(abs(da))
            sign_delta *= math.copysign(1.0, da)
        w = J @ w
        norm = float(np.linalg.norm(w))
        log_scale += math.log(norm)
        w /= norm
        if w[0] <= 0.0:
            raise GreenSetViolation(f"b_n sign condition failed at n={k + 1}")
        slope_new = float(w[1] / w[0])
        if slope_here is None:
            diff = slope_new - s_plus[k + 1]  # s_1(x_1) - s_+(x_1): O(1)
            log_delta = math.log(abs(diff))
            sign_delta = math.copysign(1.0, diff)
        slope_here = slope_new
    log_b_n = math.log(float(w[0])) + log_scale
    s_minus_n = slope_backward(m, traj, n)
    spread = s_plus[0] - s_minus_n
    if spread <= 0.0 or sign_delta <= 0.0:
        return math.inf
    log_nn = 2.0 * log_b_n + math.log(spread) + log_delta
    return abs(math.exp(log_nn) - 1.0)


@dataclass
class GreenLimits:
    """Estimated limits s_- <= s_+ with convergence metadata."""

    s_minus: float
    s_plus: float
    gap: float
    n_used: int
    cauchy_residual: float
    converged: bool

    def require_converged(self) -> "GreenLimits":
        if not self.converged:
            raise GreenSetViolation(
                f"Green limits not Cauchy-converged (residual"
                f" {self.cauchy_residual:.3e} at n={self.n_used})"
            )
        return self


def green_limits(
    m: TwistMap,
    x,
    n_max: int = N_MAX,
    tol_cauchy: float = TOL_CAUCHY,
) -> GreenLimits:
    """Monotone limits of the slope sequences with a Cauchy stopping rule.

    Stops at the first n where both consecutive slope increments fall
    below tol_cauchy; otherwise returns the n_max values flagged
    unconverged (genuine in KAM regimes, where the decay is only 1/n).
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    seq = slope_sequences(m, x, n_max)
    fwd, bwd = seq.forward, seq.backward
    dfwd = np.diff(fwd)
    dbwd = np.diff(bwd)
    if float(np.max(dfwd)) > MONOTONE_TOL or float(np.min(dbwd)) < -MONOTONE_TOL:
        n_bad = 2 + int(np.argmax(np.maximum(dfwd, -dbwd) > MONOTONE_TOL))
        raise GreenSetViolation(
            "slope sequence lost monotonicity beyond tolerance at"
            f" n={n_bad}; point likely outside the Green set",
            n=n_bad,
        )
    for n in range(2, n_max + 1):
        res = max(abs(fwd[n - 1] - fwd[n - 2]), abs(bwd[n - 1] - bwd[n - 2]))
        if res <= tol_cauchy:
            return _limits_at(fwd, bwd, n, res, converged=True)
    res = max(abs(dfwd[-1]), abs(dbwd[-1]))
    return _limits_at(fwd, bwd, n_max, res, converged=False)


def _limits_at(fwd, bwd, n, res, converged) -> GreenLimits:
    s_plus = float(fwd[n - 1])
    s_minus = float(bwd[n - 1])
    gap = s_plus - s_minus
    if gap < -INTERLACE_MARGIN:
        raise GreenSetViolation(f"negative transversality gap {gap:.3e}")
    return GreenLimits(s_minus, s_plus, gap, n, float(res), converged)


@dataclass(frozen=True)
class GreenSetReport:
    ok: bool
    first_violation: tuple[int, int] | None  # (n, k)
    message: str


def green_set_check(
    m: TwistMap,
    x,
    n_max: int = N_MAX,
    window: int = 8,
) -> GreenSetReport:
    """Finite-n screen of Green-set membership along an orbit window.

    Verifies both sign conditions and the slope interlacing at f^k(x)
    for 0 <= k < window.  Membership at finite n is necessary evidence
    only; failure is a result, not an error.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    traj = as_trajectory(m, x)
    for k in range(window):
        shifted = traj.shifted(k)
        try:
            seq = slope_sequences(m, shifted, n_max)
        except GreenSetViolation as exc:
            return GreenSetReport(False, (exc.n or 0, k), str(exc))
        worst = seq.interlacing_violation()
        if worst > INTERLACE_MARGIN:
            return GreenSetReport(
                False,
                (seq.n_max, k),
                f"interlacing violated by {worst:.3e} at k={k}",
            )
    return GreenSetReport(True, None, "sign and interlacing conditions hold")


def invariance_residual(
    m: TwistMap,
    x,
    limits: GreenLimits,
    n_max: int = N_MAX,
    tol_cauchy: float = TOL_CAUCHY,
) -> float:
    """Angular defect of Df-invariance of the Green bundles at x.

    Pushes G_+-(x) through Df(x) and compares with limits computed
    independently at f(x).
    """
    traj = as_trajectory(m, x)
    limits_next = green_limits(m, traj.shifted(1), n_max, tol_cauchy)
    J = traj.jacobian_at(0)
    worst = 0.0
    for s_here, s_there in (
        (limits.s_minus, limits_next.s_minus),
        (limits.s_plus, limits_next.s_plus),
    ):
        v = J @ np.array([1.0, s_here])
        if v[0] == 0.0:
            return math.inf
        worst = max(worst, slope_angle_distance(float(v[1] / v[0]), s_there))
    return worst


@dataclass
class GrowthProfile:
    """|Dpi o Df^n v| for n = 1..n_max, with a growth classification."""

    norms: np.ndarray
    log_norms: np.ndarray
    classification: str  # "growing" | "bounded"


def dynamical_criterion_test(m: TwistMap, x, v, n_max: int = N_MAX) -> GrowthProfile:
    """Track the angular component of Df^n(x) v along the forward orbit.

    Vectors off G_-(x) must blow up; the G_- direction itself stays
    bounded.  Classification: "growing" when the final quarter of the
    profile is monotone increasing and the last value exceeds
    max(10, 10 x first value).
    """
    traj = as_trajectory(m, x)
    w = np.array([float(v[0]), float(v[1])])
    if not np.any(w):
        raise ValueError("direction must be nonzero")
    w /= np.linalg.norm(w)
    log_scale = 0.0
    logs = np.empty(n_max)
    for n in range(n_max):
        w = traj.jacobian_at(n) @ w
        norm = float(np.linalg.norm(w))
        log_scale += math.log(norm)
        w /= norm
        comp = abs(float(w[0]))
        logs[n] = math.log(comp) + log_scale if comp > 0.0 else -math.inf
    with np.errstate(over="ignore"):
        norms = np.exp(logs)
    tail = logs[-max(2, n_max // 4):]
    growing = bool(np.all(np.diff(tail) > 0.0)) and logs[-1] > math.log(
        max(10.0, 10.0 * norms[0])
    )
    return GrowthProfile(norms, logs, "growing" if growing else "bounded")


@dataclass
class BnGrowth:
    """b_n sequence with its exponential growth rate estimate."""

    b: np.ndarray
    log_b: np.ndarray
    log_slope: float


def growth_b_n(m: TwistMap, x, n_max: int = N_MAX) -> BnGrowth:
    """b_n(x) = Dpi o Df^n(x)(0,1), renormalized, with a log-slope fit."""
    traj = as_trajectory(m, x)
    w = np.array([0.0, 1.0])
    log_scale = 0.0
    log_b = np.empty(n_max)
    for n in range(n_max):
        w = traj.jacobian_at(n) @ w
        norm = float(np.linalg.norm(w))
        log_scale += math.log(norm)
        w /= norm
        if w[0] <= 0.0:
            raise GreenSetViolation(
                f"b_n changed sign at n={n + 1}: Green-set condition fails",
                n=n + 1,
            )
        log_b[n] = math.log(float(w[0])) + log_scale
    with np.errstate(over="ignore"):
        b = np.exp(log_b)
    half = np.arange(n_max // 2, n_max)
    slope = float(np.polyfit(half + 1.0, log_b[half], 1)[0])
    return BnGrowth(b, log_b, slope)
