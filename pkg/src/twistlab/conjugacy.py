"""Circle conjugacy of the projected orbit dynamics.

On an ordered orbit the map acts on angular projections as an
orientation-preserving circle map h with h(theta_i) = theta_{i+1}; its
powers are index shifts.  Derivative proxies are secants at a fixed
scale within the sample (no interpolation into gaps is attempted), and
g_n = -log (h^n)' feeds a subadditive-average estimate of the limit
Lambda = lim mean(g_n)/n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aubry import OrderedOrbit, check_ordered

LAMBDA_TOL = 0.05


class ConjugacyError(RuntimeError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class CircleMapSample:
    """h sampled on an orbit: lifted angles and their lifted images."""

    thetas: np.ndarray  # lifted, theta_{i+q} = theta_i + p
    p: int
    q: int

    def lifted(self, i: int) -> float:
        return self.thetas[i % self.q] + self.p * (i // self.q)

    def h_power(self, i: int, n: int) -> float:
        """Lifted h^n(theta_i) = theta_{i+n}."""
        return self.lifted(i + n)

    @property
    def positions(self) -> np.ndarray:
        return np.mod(self.thetas, 1.0)

    def degree_one_defect(self) -> float:
        """h(theta + 1) - h(theta) - 1 on the sample; exact by indexing."""
        worst = 0.0
        for i in range(self.q):
            worst = max(
                worst,
                abs((self.h_power(i + self.q, 1) - self.h_power(i, 1)) - self.p),
            )
        return worst


def build_conjugacy(orbit: OrderedOrbit) -> CircleMapSample:
    """Sample of the conjugating circle map on an accepted orbit."""
    cert = check_ordered(orbit)
    if not cert.ok:
        raise ConjugacyError(
            f"orbit is not cyclically ordered at pair {cert.witness};"
            " conjugacy undefined",
            witness=cert.witness,
        )
    return CircleMapSample(orbit.thetas.copy(), orbit.p, orbit.q)


def _circle_gap(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def secant_derivative(
    sample: CircleMapSample, n: int, i: int, scale: float
) -> float | None:
    """Secant slope of h^n at sample point i over the given scale.

    Uses the nearest sample neighbor at circle distance within
    [scale/2, scale]; returns None (flagged empty) when no neighbor
    qualifies.  Positive by order preservation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    u = sample.positions
    base = u[i % sample.q]
    best_j = -1
    best_d = math.inf
    for j in range(sample.q):
        if j == i % sample.q:
            continue
        d = _circle_gap(u[j], base)
        if 0.5 * scale <= d <= scale and d < best_d:
            best_d = d
            best_j = j
    if best_j < 0:
        return None
    return _secant_pair(sample, n, i % sample.q, best_j)


def _secant_pair(sample: CircleMapSample, n: int, i: int, j: int) -> float:
    u = sample.positions
    darg = (u[j] - u[i] + 0.5) % 1.0 - 0.5  # representative in [-1/2, 1/2)
    ti, tj = sample.thetas[i], sample.thetas[j]
    # Integer deck shift aligning the stored lift of j with the short arc.
    shift = round(darg - (tj - ti))
    dimg = (sample.h_power(j, n) + shift) - sample.h_power(i, n)
    slope = dimg / darg
    if slope <= 0.0:
        raise ConjugacyError(
            f"non-positive secant of h^{n} between samples {i} and {j};"
            " order certificate violated",
            witness=(i, j),
        )
    return slope


def default_scale(sample: CircleMapSample) -> float:
    """Four mean adjacent gaps (= 4/q).

    The mean is deliberate: on Cantor samples the median gap collapses
    with the clustering and would leave most base points without a
    neighbor at measuring scale.
    """
    return 4.0 / sample.q


@dataclass
class SubadditiveEstimate:
    """Orbit-averaged g_n = -log (h^n)' table and its linear-growth rate."""

    n_list: list[int]
    means: list[float]
    counts: list[int]
    Lambda: float
    inf_normalized_mean: float
    scale: float
    sparse_warnings: int

    def normalized_means(self) -> list[float]:
        return [m / n for n, m in zip(self.n_list, self.means)]


def mean_g_n(
    sample: CircleMapSample, n: int, scale: float
) -> tuple[float, int, int]:
    """Average of -log secant(h^n) over base points with a scale neighbor."""
    total = 0.0
    count = 0
    sparse = 0
    for i in range(sample.q):
        sd = secant_derivative(sample, n, i, scale)
        if sd is None:
            sparse += 1
            continue
        total += -math.log(sd)
        count += 1
    if count == 0:
        return math.nan, 0, sparse
    return total / count, count, sparse


def lambda_estimate(
    samples, n_list, scale: float | None = None
) -> SubadditiveEstimate:
    """Subadditive-limit estimate from per-n orbit averages of g_n.

    ``samples`` is one CircleMapSample or a ladder of them (convergent
    depths); means pool all of them.  Lambda is the least-squares slope
    of mean g_n against n over the largest half of n_list (linear growth
    of subadditive averages); inf_n mean(g_n)/n is kept as the
    complementary upper-bound diagnostic.
    """
    if isinstance(samples, CircleMapSample):
        samples = [samples]
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 2:
        raise ValueError("n_list needs at least two entries")
    means: list[float] = []
    counts: list[int] = []
    sparse_total = 0
    used_scale = scale
    for n in n_list:
        total, cnt = 0.0, 0
        for s in samples:
            sc = used_scale if used_scale is not None else default_scale(s)
            mg, c, sparse = mean_g_n(s, n, sc)
            sparse_total += sparse
            if c:
                total += mg * c
                cnt += c
        means.append(total / cnt if cnt else math.nan)
        counts.append(cnt)
    half = len(n_list) // 2
    ns = np.array(n_list[half:], dtype=float)
    ms = np.array(means[half:], dtype=float)
    if np.any(~np.isfinite(ms)):
        raise ConjugacyError("g_n means undefined on the fitting range")
    Lambda = float(np.polyfit(ns, ms, 1)[0])
    finite = [(m / n) for n, m in zip(n_list, means) if math.isfinite(m)]
    return SubadditiveEstimate(
        n_list=n_list,
        means=means,
        counts=counts,
        Lambda=Lambda,
        inf_normalized_mean=min(finite) if finite else math.nan,
        scale=used_scale if used_scale is not None else math.nan,
        sparse_warnings=sparse_total,
    )


def subadditivity_defect(
    sample: CircleMapSample, n: int, m: int, scale: float
) -> float:
    """Mean over base points of g_{n+m}(x) - g_n(x) - g_m(h^n x).

    Exact chain-rule cancellation holds only over matched intervals; at
    a fixed measuring scale the defect reflects how the dynamics
    distorts scales, so callers compare it against a noise budget.
    """
    defects = []
    for i in range(sample.q):
        a = secant_derivative(sample, n + m, i, scale)
        b = secant_derivative(sample, n, i, scale)
        c = secant_derivative(sample, m, i + n, scale)
        if a is None or b is None or c is None:
            continue
        defects.append(-math.log(a) + math.log(b) + math.log(c))
    if not defects:
        return math.nan
    return float(np.mean(defects))
