"""Minimizing Birkhoff orbits via discrete action minimization.

A rational rotation number p/q is realized by the configuration
(theta_0 .. theta_{q-1}) with boundary theta_{i+q} = theta_i + p that
minimizes the summed generating function

    W = sum_i h(theta_i, theta_{i+1}).

Minimizers are computed by damped Newton on the periodic tridiagonal
Hessian with a projected-gradient fallback.  Irrational rotation numbers
are approximated by the orbit of the deepest continued-fraction
convergent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .trajectory import OrbitTrajectory, Trajectory, as_trajectory
from .twistmap import LiftedPoint, Point, TwistMap, reduce_angle

TOL_GRAD = 1e-11
MAX_NEWTON_ITERS = 200
MAX_HALVINGS = 60
CLOSURE_TOL = 1e-9

# Partial quotient beyond which a float has no further continued-fraction
# information; treat the expansion as terminated (rational input).
_RATIONAL_QUOTIENT_CUTOFF = 1e12

NAMED_IRRATIONALS = {
    "golden": (math.sqrt(5.0) - 1.0) / 2.0,
    "silver": math.sqrt(2.0) - 1.0,
}


class MinimizationError(RuntimeError):
    """Newton/gradient descent failed; carries the best iterate."""

    def __init__(self, message: str, config: "Configuration | None" = None):
        super().__init__(message)
        self.config = config


class OrderingError(RuntimeError):
    """A converged critical point violates the Birkhoff cyclic order."""

    def __init__(self, message: str, witness: tuple[int, int] | None = None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class ConvergentList:
    """Continued-fraction convergents of a value in (0, 1)."""

    value: float
    fractions: tuple[Fraction, ...]
    rational: bool


def convergents(value: float, depth: int) -> ConvergentList:
    """Best rational approximations p_k/q_k with q_k >= 2, q_k increasing.

    The trivial integer approximants (denominator 1) are dropped; the
    golden number therefore starts at 1/2.  A terminating expansion, or a
    partial quotient past float resolution, flags the input as rational.
    """
    if not (0.0 < value < 1.0):
        raise ValueError(f"value must lie in (0, 1), got {value!r}")
    if depth < 1:
        raise ValueError("depth must be >= 1")

    out: list[Fraction] = []
    # Recurrence state after the a_0 = 0 convergent 0/1.
    h_prev2, h_prev = 1, 0
    k_prev2, k_prev = 0, 1
    x = value
    rational = False
    while len(out) < depth:
        if x == 0.0:
            rational = True
            break
        x = 1.0 / x
        a = math.floor(x)
        if a > _RATIONAL_QUOTIENT_CUTOFF:
            rational = True
            break
        x -= a
        h = a * h_prev + h_prev2
        k = a * k_prev + k_prev2
        h_prev2, h_prev = h_prev, h
        k_prev2, k_prev = k_prev, k
        if k >= 2:
            out.append(Fraction(h, k))
    return ConvergentList(value, tuple(out), rational)


def _as_fraction(rho) -> Fraction:
    f = Fraction(rho) if not isinstance(rho, Fraction) else rho
    if f.denominator < 1:
        raise ValueError(f"invalid rotation number {rho!r}")
    return f


@dataclass
class Configuration:
    """Lifted configuration for p/q with boundary theta_{i+q} = theta_i + p."""

    rho: Fraction
    thetas: np.ndarray
    grad_norm: float | None = None
    n_iters: int = 0

    @property
    def p(self) -> int:
        return self.rho.numerator

    @property
    def q(self) -> int:
        return self.rho.denominator

    def __post_init__(self) -> None:
        self.rho = _as_fraction(self.rho)
        self.thetas = np.asarray(self.thetas, dtype=float)
        if len(self.thetas) != self.q:
            raise ValueError(
                f"configuration for {self.rho} needs {self.q} angles,"
                f" got {len(self.thetas)}"
            )


def equispaced(rho, theta0: float = 0.0) -> Configuration:
    rho = _as_fraction(rho)
    i = np.arange(rho.denominator)
    return Configuration(rho, theta0 + i * (rho.numerator / rho.denominator))


def _bond_angles(config: Configuration) -> tuple[np.ndarray, np.ndarray]:
    """Left and right endpoints of the q bonds (theta_i, theta_{i+1})."""
    t = config.thetas
    left = t
    right = np.concatenate([t[1:], [t[0] + config.p]])
    return left, right


def action(m: TwistMap, config: Configuration) -> float:
    left, right = _bond_angles(config)
    return float(sum(m.generating(a, b).h for a, b in zip(left, right)))


def action_gradient(m: TwistMap, config: Configuration) -> np.ndarray:
    left, right = _bond_angles(config)
    evals = [m.generating(a, b) for a, b in zip(left, right)]
    d1 = np.array([g.d1h for g in evals])
    d2 = np.array([g.d2h for g in evals])
    # grad_i = d2h(theta_{i-1}, theta_i) + d1h(theta_i, theta_{i+1});
    # bond i-1 ends at theta_i, so its d2h lands on slot i.
    return np.roll(d2, 1) + d1


def action_hessian(m: TwistMap, config: Configuration) -> np.ndarray:
    q = config.q
    left, right = _bond_angles(config)
    H = np.zeros((q, q))
    for i, (a, b) in enumerate(zip(left, right)):
        g = m.generating(a, b)
        j = (i + 1) % q
        H[i, i] += g.d11h
        H[j, j] += g.d22h
        H[i, j] += g.d12h
        H[j, i] += g.d12h
    return H


def smallest_eigenvalue(H: np.ndarray, tol: float = 1e-10) -> float:
    """Smallest eigenvalue by bisection on Cholesky positive-definiteness."""
    d = np.diag(H)
    radii = np.sum(np.abs(H), axis=1) - np.abs(d)
    lo = float(np.min(d - radii))
    hi = float(np.max(d + radii))
    eye = np.eye(len(H))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        try:
            np.linalg.cholesky(H - mid * eye)
            lo = mid
        except np.linalg.LinAlgError:
            hi = mid
    return 0.5 * (lo + hi)


def _circle_dist(a: float, b: float) -> float:
    d = abs(reduce_angle(a) - reduce_angle(b))
    return min(d, 1.0 - d)


def _cyclic_order_witness(thetas: np.ndarray, p: int) -> tuple[int, int] | None:
    """First pair breaking the Birkhoff cyclic order, else None.

    A p/q configuration is cyclically ordered exactly when the time shift
    i -> i+1 advances the angular rank of every point by p mod q, i.e. the
    orbit has the cyclic order type of the rigid rotation.
    """
    q = len(thetas)
    if q < 2:
        return None
    u = np.mod(thetas, 1.0)
    order = np.argsort(u, kind="stable")
    su = u[order]
    for k in range(q - 1):
        if su[k] == su[k + 1]:  # coincident projections: not a graph
            return (int(order[k]), int(order[k + 1]))
    rank = np.empty(q, dtype=int)
    rank[order] = np.arange(q)
    c = p % q
    for i in range(q):
        j = (i + 1) % q
        if rank[j] != (rank[i] + c) % q:
            return (i, j)
    return None


def _canonicalize(config: Configuration) -> Configuration:
    """Relabel so theta_0 is the orbit point closest to angle 0.

    Deterministic representative: cyclic index shift plus an integer
    translation putting theta_0 in [-1/2, 1/2).
    """
    t = config.thetas
    q, p = config.q, config.p
    dist = np.minimum(np.mod(t, 1.0), 1.0 - np.mod(t, 1.0))
    i_star = int(np.argmin(dist))
    j = i_star + np.arange(q)
    rotated = t[j % q] + p * (j // q)
    shift = math.floor(rotated[0] + 0.5)
    return replace(config, thetas=rotated - shift)


# Hessians more indefinite than this at a converged point mark a saddle.
PSD_TOL = -1e-8


def minimize_orbit(
    m: TwistMap,
    rho,
    init_strategy: str = "equispaced",
    tol_grad: float = TOL_GRAD,
    max_iters: int = MAX_NEWTON_ITERS,
    theta0: float = 0.0,
) -> Configuration:
    """Frenkel-Kontorova minimizer for rotation number p/q.

    Damped Newton with step halving until the action decreases; after 60
    failed halvings one gradient step with Armijo backtracking is taken
    instead.  A converged critical point is accepted only if its Hessian
    is positive semidefinite and the configuration is Birkhoff-ordered;
    otherwise the descent restarts from deterministically perturbed
    initializations (equispaced starts can sit exactly on saddles, e.g.
    rho = 1/2).  Raises MinimizationError / OrderingError when every
    restart fails.
    """
    rho = _as_fraction(rho)
    if init_strategy == "equispaced":
        init = equispaced(rho, theta0).thetas
    elif init_strategy == "continuation":
        init = _continuation_init(m, rho, tol_grad, max_iters, theta0)
    else:
        raise ValueError(f"unknown init_strategy {init_strategy!r}")

    last_error: Exception | None = None
    for attempt, start in enumerate(_restart_ladder(m, rho, init, tol_grad,
                                                    max_iters, theta0)):
        try:
            result = _canonicalize(_descend(m, rho, start, tol_grad, max_iters))
        except MinimizationError as exc:
            last_error = exc
            continue
        result.grad_norm = float(np.max(np.abs(action_gradient(m, result))))
        lam_min = smallest_eigenvalue(action_hessian(m, result))
        if lam_min < PSD_TOL:
            last_error = MinimizationError(
                f"critical point for {rho} is a saddle (Hessian eigenvalue"
                f" {lam_min:.3e}); attempt {attempt}",
                config=result,
            )
            continue
        witness = _cyclic_order_witness(result.thetas, result.p)
        if witness is not None:
            last_error = OrderingError(
                f"converged critical point for {rho} is not cyclically"
                f" ordered at pair {witness}; attempt {attempt}",
                witness=witness,
            )
            continue
        return result
    assert last_error is not None
    raise last_error


def _restart_ladder(m, rho, init, tol_grad, max_iters, theta0):
    """Initial guesses tried in order on saddle/ordering rejections.

    Phase-shifted equispaced starts come first: symmetric grids sit in
    the basin of the minimax saddle, and the minimizer lives at a
    shifted phase (Peierls valley).  Random perturbations and coupling
    continuation follow as last resorts.
    """
    yield init
    q = rho.denominator
    for j in (1, 2, 3):
        yield equispaced(rho, theta0 + j / (4.0 * q)).thetas
    for scale_exp, seed in ((-4, 1), (-2, 2), (-1, 3)):
        rng = np.random.default_rng(1000 * q + seed)
        yield init + 10.0**scale_exp * rng.standard_normal(len(init))
    yield _continuation_init(m, rho, tol_grad, max_iters, theta0)


def _descend(
    m: TwistMap,
    rho: Fraction,
    theta_init: np.ndarray,
    tol_grad: float,
    max_iters: int,
) -> Configuration:
    theta = np.array(theta_init, dtype=float)
    config = Configuration(rho, theta)
    W = action(m, config)
    n_iters = 0
    for n_iters in range(max_iters + 1):
        cur = replace(config, thetas=theta)
        g = action_gradient(m, cur)
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol_grad:
            return replace(cur, grad_norm=gnorm, n_iters=n_iters)
        if n_iters == max_iters:
            break
        # Endgame: inside the basin, action differences drop below
        # rounding noise, so take undamped Newton steps on the gradient
        # itself (accepted on gradient-norm decrease).
        if gnorm < 1e-6:
            step = _newton_on_gradient(m, cur, g, gnorm)
            if step is not None:
                theta = step
                W = action(m, replace(cur, thetas=theta))
                continue
        # Descent phase: Newton on a positive-definite model only; an
        # indefinite Hessian drags the iteration to saddles (unordered
        # critical points), so shift by mu*I until Cholesky succeeds.
        step = None
        delta = _newton_direction(action_hessian(m, cur), g)
        if delta is not None and float(delta @ g) < 0.0:
            step = _halve_until_decrease(m, cur, W, delta)
        if step is None:
            step = _armijo_gradient_step(m, cur, W, g)
        if step is None:
            raise MinimizationError(
                f"line search stalled for {rho} (grad sup-norm {gnorm:.3e})",
                config=replace(cur, grad_norm=gnorm, n_iters=n_iters),
            )
        theta, W = step
    raise MinimizationError(
        f"no convergence for {rho} after {max_iters} Newton steps"
        f" (grad sup-norm {gnorm:.3e})",
        config=replace(config, thetas=theta, grad_norm=gnorm, n_iters=n_iters),
    )


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray | None:
    """Solve (H + mu*I) delta = -g with the smallest mu making H + mu*I PD."""
    mu = 0.0
    bump = 1e-3 * max(1.0, float(np.max(np.abs(np.diag(H)))))
    eye = np.eye(len(H))
    for _ in range(80):
        try:
            L = np.linalg.cholesky(H + mu * eye)
        except np.linalg.LinAlgError:
            mu = bump if mu == 0.0 else 2.0 * mu
            continue
        delta = np.linalg.solve(L.T, np.linalg.solve(L, -g))
        return delta if np.all(np.isfinite(delta)) else None
    return None


def _newton_on_gradient(m, config, g, gnorm):
    """Root-finding Newton step on the gradient; None if it cannot improve."""
    try:
        delta = np.linalg.solve(action_hessian(m, config), -g)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(delta)):
        return None
    t = 1.0
    for _ in range(MAX_HALVINGS):
        cand = config.thetas + t * delta
        g_new = action_gradient(m, replace(config, thetas=cand))
        if float(np.max(np.abs(g_new))) < gnorm:
            return cand
        t *= 0.5
    return None


def _halve_until_decrease(m, config, W, delta):
    t = 1.0
    for _ in range(MAX_HALVINGS):
        cand = config.thetas + t * delta
        W_new = action(m, replace(config, thetas=cand))
        if math.isfinite(W_new) and W_new < W:
            return cand, W_new
        t *= 0.5
    return None


def _armijo_gradient_step(m, config, W, g):
    gg = float(g @ g)
    t = 1.0
    for _ in range(MAX_HALVINGS):
        cand = config.thetas - t * g
        W_new = action(m, replace(config, thetas=cand))
        if math.isfinite(W_new) and W_new <= W - 1e-4 * t * gg:
            return cand, W_new
        t *= 0.5
    return None


def _continuation_init(m, rho, tol_grad, max_iters, theta0) -> np.ndarray:
    """Warm start by stepping the coupling up from the integrable limit."""
    K_target = getattr(m, "K", None)
    theta = equispaced(rho, theta0).thetas
    if K_target is None or K_target == 0.0:
        return theta
    n_stages = max(1, math.ceil(K_target / 0.25))
    for s in range(1, n_stages):
        stage = type(m)(K_target * s / n_stages)
        theta = _descend(m=stage, rho=_as_fraction(rho), theta_init=theta,
                         tol_grad=tol_grad, max_iters=max_iters).thetas
    return theta


@dataclass
class OrderedOrbit:
    """Finite Aubry-Mather approximation: graph points plus diagnostics."""

    rho: Fraction
    thetas: np.ndarray  # lifted, canonical representative
    rs: np.ndarray
    lipschitz_bound: float
    closure_residual: float
    grad_norm: float | None = None
    hausdorff_proxy: float | None = None
    max_theta_gap: float | None = None
    rho_value: float | None = None  # target irrational, if approximating one
    depth: int | None = None

    @property
    def p(self) -> int:
        return self.rho.numerator

    @property
    def q(self) -> int:
        return self.rho.denominator

    @property
    def points(self) -> list[Point]:
        return [Point(t, r) for t, r in zip(self.thetas, self.rs)]

    def trajectory(self, m: TwistMap, base_index: int = 0) -> OrbitTrajectory:
        return OrbitTrajectory(m, self.thetas, self.rs, self.p, base_index)


@dataclass(frozen=True)
class OrderCertificate:
    ok: bool
    witness: tuple[int, int] | None = None


def orbit_points(m: TwistMap, config: Configuration) -> OrderedOrbit:
    """Attach momenta r_i = -d1h(theta_i, theta_{i+1}) and validate closure."""
    left, right = _bond_angles(config)
    rs = np.array([-m.generating(a, b).d1h for a, b in zip(left, right)])
    q = config.q
    residual = 0.0
    for i in range(q):
        img = m.apply(Point(config.thetas[i], rs[i]))
        tgt = Point(config.thetas[(i + 1) % q], rs[(i + 1) % q])
        residual = max(
            residual,
            math.hypot(_circle_dist(img.theta, tgt.theta), img.r - tgt.r),
        )
    if residual > CLOSURE_TOL:
        raise MinimizationError(
            f"orbit closure residual {residual:.3e} exceeds {CLOSURE_TOL};"
            " configuration is not a converged critical point",
            config=config,
        )
    lipschitz = 0.0
    for i in range(q):
        for j in range(i + 1, q):
            dt = _circle_dist(config.thetas[i], config.thetas[j])
            if dt > 0:
                lipschitz = max(lipschitz, abs(rs[i] - rs[j]) / dt)
    return OrderedOrbit(
        rho=config.rho,
        thetas=config.thetas.copy(),
        rs=rs,
        lipschitz_bound=lipschitz,
        closure_residual=residual,
        grad_norm=config.grad_norm,
    )


def check_ordered(orbit: OrderedOrbit) -> OrderCertificate:
    """Order preservation of the projected dynamics over all point pairs."""
    if orbit.q < 2:
        return OrderCertificate(True)
    witness = _cyclic_order_witness(orbit.thetas, orbit.p)
    return OrderCertificate(witness is None, witness)


def rotation_number_estimate(m: TwistMap, start, n: int) -> float:
    """(lifted theta_n - lifted theta_0) / n along the forward orbit."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(start, LiftedPoint):
        cur = start
        for _ in range(n):
            cur = m.apply_lift(cur)
        return (cur.theta_lift - start.theta_lift) / n
    traj = as_trajectory(m, start)
    return (traj.lifted_theta(n) - traj.lifted_theta(0)) / n


def hausdorff_distance(a: OrderedOrbit, b: OrderedOrbit) -> float:
    """Symmetric Hausdorff distance between two orbit point clouds."""

    def one_sided(xs, ys) -> float:
        worst = 0.0
        for tx, rx in xs:
            best = math.inf
            for ty, ry in ys:
                best = min(best, math.hypot(_circle_dist(tx, ty), rx - ry))
            worst = max(worst, best)
        return worst

    pa = list(zip(a.thetas, a.rs))
    pb = list(zip(b.thetas, b.rs))
    return max(one_sided(pa, pb), one_sided(pb, pa))


def max_theta_gap(orbit: OrderedOrbit) -> float:
    """Largest angular gap of the projected cloud (wraparound included)."""
    u = np.sort(np.mod(orbit.thetas, 1.0))
    gaps = np.diff(u, append=u[0] + 1.0)
    return float(np.max(gaps))


def am_set_approx(
    m: TwistMap,
    value: float,
    depth: int,
    init_strategy: str = "equispaced",
    tol_grad: float = TOL_GRAD,
) -> OrderedOrbit:
    """Approximate the Aubry-Mather set with irrational rotation number.

    Minimizes every convergent orbit up to ``depth`` and returns the
    deepest one, tagged with the Hausdorff distance between the last two
    as a convergence proxy and the maximum theta-gap (Cantor signature).
    """
    if depth < 3:
        raise ValueError("depth must be >= 3")
    conv = convergents(value, depth)
    if conv.rational:
        raise ValueError(
            f"value {value!r} has a terminating expansion; use the rational"
            " pipeline"
        )
    orbits = []
    for frac in conv.fractions:
        try:
            config = minimize_orbit(m, frac, init_strategy, tol_grad)
            orbits.append(orbit_points(m, config))
        except (MinimizationError, OrderingError) as exc:
            raise MinimizationError(
                f"convergent {frac} (q={frac.denominator}) failed to"
                f" minimize: {exc}"
            ) from exc
    deepest = orbits[-1]
    deepest.hausdorff_proxy = (
        hausdorff_distance(orbits[-1], orbits[-2]) if len(orbits) > 1 else None
    )
    deepest.max_theta_gap = max_theta_gap(deepest)
    deepest.rho_value = value
    deepest.depth = depth
    return deepest


@dataclass(frozen=True)
class MatherMeasureApprox:
    """Uniform weights on a periodic minimizing orbit."""

    support: OrderedOrbit

    @property
    def weights(self) -> np.ndarray:
        q = self.support.q
        return np.full(q, 1.0 / q)

    def invariance_defect(self) -> float:
        # f permutes the orbit points cyclically, so pushing uniform
        # weights forward returns uniform weights; the defect is zero by
        # construction and asserted structurally.
        w = self.weights
        return float(np.max(np.abs(np.roll(w, 1) - w)))
