"""Lyapunov exponents and splittings of 2x2 symplectic cocycles.

Sources are either tangent cocycles of a map orbit or synthetic constant
generators (hyperbolic, shear, rotation) used as closed-form oracles.
Exponents come from QR iteration with periodic renormalization; the
independent Green-gap estimator lower-bounds the same quantity through
the norm inequality |Df^n| >= b_n (s_+ - s_{-n}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .green import (
    GreenLimits,
    GreenSetViolation,
    ProjLine,
    green_limits,
    line_angle_distance,
)
from .trajectory import Trajectory, as_trajectory
from .twistmap import Point, TwistMap

RENORM_EVERY = 20
DET_TOL = 1e-12
OSELEDETS_RATIO_MIN = 1e3

# Quasi-hyperbolicity verdict thresholds: growth C*rho^window with C=1.
QH_GROWTH_RATE = 1.05
QH_BOUNDED_CEILING = 2.0
QH_MIN_WINDOW = 50


class CocycleSource:
    """Sequence of det-1 matrices; matrix(k) maps fiber k to fiber k+1."""

    def matrix(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def reversed(self) -> "CocycleSource":
        return _ReversedSource(self)

    @staticmethod
    def from_orbit(m: TwistMap, x) -> "CocycleSource":
        return _OrbitSource(as_trajectory(m, x))

    @staticmethod
    def constant(mat) -> "CocycleSource":
        return _SequenceSource([mat])

    @staticmethod
    def hyperbolic(lam: float) -> "CocycleSource":
        return CocycleSource.constant(np.diag([math.exp(lam), math.exp(-lam)]))

    @staticmethod
    def shear() -> "CocycleSource":
        return CocycleSource.constant(np.array([[1.0, 1.0], [0.0, 1.0]]))

    @staticmethod
    def rotation(angle: float) -> "CocycleSource":
        c, s = math.cos(angle), math.sin(angle)
        return CocycleSource.constant(np.array([[c, -s], [s, c]]))

    @staticmethod
    def from_sequence(mats) -> "CocycleSource":
        """Periodic fixture cycling through the given matrices."""
        return _SequenceSource(list(mats))


class _SequenceSource(CocycleSource):
    def __init__(self, mats):
        self.mats = [np.array(m, dtype=float) for m in mats]
        for mat in self.mats:
            if mat.shape != (2, 2):
                raise ValueError("cocycle matrices must be 2x2")
            det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
            if abs(det - 1.0) > DET_TOL:
                raise ValueError(f"matrix determinant {det} is not 1")

    def matrix(self, k: int) -> np.ndarray:
        return self.mats[k % len(self.mats)]


class _OrbitSource(CocycleSource):
    def __init__(self, traj: Trajectory):
        self.traj = traj

    def matrix(self, k: int) -> np.ndarray:
        return self.traj.jacobian_at(k)


def _inv2(mat: np.ndarray) -> np.ndarray:
    # det-1 inverse
    return np.array([[mat[1, 1], -mat[0, 1]], [-mat[1, 0], mat[0, 0]]])


class _ReversedSource(CocycleSource):
    def __init__(self, inner: CocycleSource):
        self.inner = inner

    def matrix(self, k: int) -> np.ndarray:
        return _inv2(self.inner.matrix(-k - 1))

    def reversed(self) -> CocycleSource:
        return self.inner


@dataclass
class LyapunovEstimate:
    """Top exponent with iteration metadata and a block-averaged CI."""

    lam: float
    n: int
    renorm_count: int
    ci_halfwidth: float


def lyapunov_qr(
    source: CocycleSource,
    n: int,
    renorm_every: int = RENORM_EVERY,
) -> LyapunovEstimate:
    """Top Lyapunov exponent via QR with renormalization every few steps.

    Both QR exponents are tracked and the larger is reported, so exactly
    diagonal cocycles aligned against the initial frame cannot fool the
    estimate.  Deterministic given (source, n, renorm_every).
    """
    if renorm_every < 1 or n < renorm_every:
        raise ValueError("need n >= renorm_every >= 1")
    Q = np.eye(2)
    logs1: list[float] = []
    logs2: list[float] = []
    steps: list[int] = []
    k = 0
    while k < n:
        block = min(renorm_every, n - k)
        P = Q
        for j in range(block):
            P = source.matrix(k + j) @ P
        if not np.all(np.isfinite(P)):
            raise FloatingPointError(
                "cocycle block overflowed; reduce renorm_every"
            )
        Q, R = np.linalg.qr(P)
        signs = np.sign(np.diag(R))
        signs[signs == 0.0] = 1.0
        Q = Q * signs
        r11, r22 = abs(R[0, 0]), abs(R[1, 1])
        if r11 == 0.0 or r22 == 0.0:
            raise FloatingPointError("degenerate QR block (zero diagonal)")
        logs1.append(math.log(r11))
        logs2.append(math.log(r22))
        steps.append(block)
        k += block
    lam1 = sum(logs1) / n
    lam2 = sum(logs2) / n
    top = logs1 if lam1 >= lam2 else logs2
    lam = max(lam1, lam2)
    return LyapunovEstimate(
        lam=max(lam, 0.0),
        n=n,
        renorm_count=len(steps),
        ci_halfwidth=_block_ci(top, steps),
    )


def _block_ci(logs: list[float], steps: list[int], n_blocks: int = 10) -> float:
    """Half-width from block-averaged per-step rates (2 sigma / sqrt(B))."""
    if len(logs) < 2:
        return math.inf
    b = min(n_blocks, len(logs))
    idx = np.array_split(np.arange(len(logs)), b)
    rates = np.array(
        [sum(logs[i] for i in part) / sum(steps[i] for i in part) for part in idx]
    )
    if len(rates) < 2:
        return math.inf
    return float(2.0 * np.std(rates, ddof=1) / math.sqrt(len(rates)))


def forward_backward_agreement(
    source: CocycleSource, n: int, renorm_every: int = RENORM_EVERY
) -> tuple[LyapunovEstimate, LyapunovEstimate]:
    """Exponents of the cocycle and its inverse (must agree: det = 1)."""
    return (
        lyapunov_qr(source, n, renorm_every),
        lyapunov_qr(source.reversed(), n, renorm_every),
    )


def green_lyapunov_estimate(
    m: TwistMap,
    x,
    n: int,
    limits: GreenLimits | None = None,
    gap_floor_factor: float = 10.0,
) -> float:
    """Exponent from the Green-gap norm bound |Df^n| >= b_n (s_+ - s_{-n}).

    Requires converged limits with a gap clearly above the Cauchy
    residual; undefined (error) when the bundles coincide.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = as_trajectory(m, x)
    if limits is None:
        limits = green_limits(m, traj)
    if not limits.converged or limits.gap <= gap_floor_factor * max(
        limits.cauchy_residual, 1e-15
    ):
        raise GreenSetViolation(
            f"transversality gap {limits.gap:.3e} is not resolved above its"
            f" residual {limits.cauchy_residual:.3e}; Green-gap estimator"
            " undefined (coincident bundles)"
        )
    # log b_n via renormalized push of the vertical.
    w = np.array([0.0, 1.0])
    log_scale = 0.0
    for k in range(n):
        w = traj.jacobian_at(k) @ w
        norm = float(np.linalg.norm(w))
        log_scale += math.log(norm)
        w /= norm
    if w[0] <= 0.0:
        raise GreenSetViolation(f"b_n changed sign at n={n}", n=n)
    log_b_n = math.log(float(w[0])) + log_scale
    # s_{-n}(x) by pulling the vertical back from f^n(x).
    v = np.array([0.0, 1.0])
    for j in range(n, 0, -1):
        v = _inv2(traj.jacobian_at(j - 1)) @ v
        v /= np.linalg.norm(v)
    s_minus_n = float(v[1] / v[0])
    spread = limits.s_plus - s_minus_n
    if spread <= 0.0:
        raise GreenSetViolation(f"s_+ - s_(-n) = {spread:.3e} not positive")
    return (log_b_n + math.log(spread)) / n


@dataclass
class SplittingEstimate:
    """Oseledets directions from two-sided most-contracted singular vectors."""

    e_s: ProjLine
    e_u: ProjLine
    angle_gap: float
    conclusive: bool
    singular_ratio_fwd: float
    singular_ratio_bwd: float


def _scaled_product(source: CocycleSource, n: int, backward: bool) -> np.ndarray:
    P = np.eye(2)
    src = source.reversed() if backward else source
    for k in range(n):
        P = src.matrix(k) @ P
        P /= np.linalg.norm(P)
    return P


def _contracted_direction(P: np.ndarray) -> tuple[ProjLine, float]:
    _, s, vt = np.linalg.svd(P)
    ratio = float(s[0] / s[1]) if s[1] > 0.0 else math.inf
    return ProjLine.from_direction(vt[1]), ratio


def oseledets_directions(
    source: CocycleSource,
    n: int,
    ratio_min: float = OSELEDETS_RATIO_MIN,
) -> SplittingEstimate:
    """E^s / E^u at the base fiber from n-step singular directions.

    e_s is the most-contracted right singular direction of the forward
    n-step product, e_u that of the backward product.  Inconclusive
    (not an error) unless both singular ratios exceed ratio_min.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    e_s, ratio_fwd = _contracted_direction(_scaled_product(source, n, False))
    e_u, ratio_bwd = _contracted_direction(_scaled_product(source, n, True))
    conclusive = ratio_fwd >= ratio_min and ratio_bwd >= ratio_min
    return SplittingEstimate(
        e_s=e_s,
        e_u=e_u,
        angle_gap=line_angle_distance(e_s.angle, e_u.angle),
        conclusive=conclusive,
        singular_ratio_fwd=ratio_fwd,
        singular_ratio_bwd=ratio_bwd,
    )


@dataclass
class QuasiHypReport:
    window: int
    min_max_norm: float
    classification: str  # "quasi-hyperbolic" | "not" | "inconclusive"
    threshold: float
    worst_direction: np.ndarray


def quasi_hyperbolicity_scan(
    source: CocycleSource,
    window: int = QH_MIN_WINDOW,
    n_dirs: int = 64,
) -> QuasiHypReport:
    """Finite-window screen of the unbounded-orbit condition.

    For each sampled unit direction v the largest norm of its images over
    |k| <= window is recorded; the minimum of those maxima is the score.
    Scores above 1.05^window are called quasi-hyperbolic, scores <= 2 at
    window >= 50 are called not, anything else is inconclusive.  The
    asymptotic condition is undecidable at finite truncation, so the
    verdict is evidence, not proof.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if n_dirs < 8:
        raise ValueError("n_dirs must be >= 8")
    angles = np.pi * np.arange(n_dirs) / n_dirs  # lines: sign is irrelevant
    rev = source.reversed()
    min_max = math.inf
    worst = np.array([1.0, 0.0])
    for a in angles:
        v0 = np.array([math.cos(a), math.sin(a)])
        peak = 1.0  # k = 0
        for src in (source, rev):
            w = v0.copy()
            log_scale = 0.0
            for k in range(window):
                w = src.matrix(k) @ w
                norm = float(np.linalg.norm(w))
                log_scale += math.log(norm)
                w /= norm
                peak = max(peak, math.exp(min(log_scale, 700.0)))
        if peak < min_max:
            min_max = peak
            worst = v0
    threshold = QH_GROWTH_RATE**window
    if min_max >= threshold:
        verdict = "quasi-hyperbolic"
    elif min_max <= QH_BOUNDED_CEILING and window >= QH_MIN_WINDOW:
        verdict = "not"
    else:
        verdict = "inconclusive"
    return QuasiHypReport(window, float(min_max), verdict, threshold, worst)


@dataclass
class GreenOseledetsRow:
    index: int
    residual_stable: float
    residual_unstable: float


@dataclass
class GreenOseledetsTable:
    rows: list[GreenOseledetsRow]
    skipped: int
    flag: str | None = None

    @property
    def max_residual(self) -> float:
        if not self.rows:
            return math.nan
        return max(
            max(r.residual_stable, r.residual_unstable) for r in self.rows
        )


def compare_green_oseledets(
    m: TwistMap,
    orbit,
    n: int,
    n_max: int = 64,
    tol_cauchy: float = 1e-9,
) -> GreenOseledetsTable:
    """Per-point angular residuals between Green limits and Oseledets axes.

    Points with unconverged limits or inconclusive singular ratios are
    skipped; an empty table is flagged rather than an error (integrable
    regime behaves that way).
    """
    rows: list[GreenOseledetsRow] = []
    skipped = 0
    for i in range(orbit.q):
        traj = orbit.trajectory(m, base_index=i)
        try:
            lim = green_limits(m, traj, n_max, tol_cauchy)
        except GreenSetViolation:
            skipped += 1
            continue
        split = oseledets_directions(CocycleSource.from_orbit(m, traj), n)
        if not lim.converged or not split.conclusive:
            skipped += 1
            continue
        g_minus = math.atan(lim.s_minus) % math.pi
        g_plus = math.atan(lim.s_plus) % math.pi
        rows.append(
            GreenOseledetsRow(
                index=i,
                residual_stable=line_angle_distance(g_minus, split.e_s.angle),
                residual_unstable=line_angle_distance(g_plus, split.e_u.angle),
            )
        )
    flag = "no conclusive points" if not rows else None
    return GreenOseledetsTable(rows, skipped, flag)
