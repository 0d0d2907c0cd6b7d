"""Invariant suites behind `twistlab verify`.

quick: per-module invariants at small size.  full: adds the headline
dichotomy experiments (hyperbolic vs curve regime, cone monotonicity).
The map factory is injectable so broken-map fixtures can prove the
suite actually fails when an invariant is violated.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .. import aubry, cocycle, conjugacy, green, regularity
from ..aubry import NAMED_IRRATIONALS
from ..twistmap import (
    LiftedPoint,
    Point,
    StandardMap,
    generating_residual,
    jacobian_fd,
    verify_twist,
)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


@dataclass
class VerifyReport:
    level: str
    results: list[CheckResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def to_doc(self) -> dict:
        return {
            "level": self.level,
            "ok": self.ok,
            "checks": [
                {"name": r.name, "ok": r.ok, "detail": r.detail,
                 "seconds": round(r.seconds, 3)}
                for r in self.results
            ],
        }


def _sample_points(n: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    return [
        Point(float(rng.uniform(0, 1)), float(rng.uniform(-2, 2)))
        for _ in range(n)
    ]


def check_twistmap_det(factory) -> tuple[bool, str]:
    worst = 0.0
    for K in (0.0, 0.5, 1.0, 2.0, 5.0):
        m = factory(K)
        for p in _sample_points(40):
            worst = max(worst, abs(m.jacobian(p).det() - 1.0))
    return worst <= 1e-12, f"max |det Df - 1| = {worst:.3e}"


def check_twistmap_roundtrip(factory) -> tuple[bool, str]:
    worst = 0.0
    for K in (0.0, 1.0, 2.0):
        m = factory(K)
        for p in _sample_points(40, seed=11):
            q = m.inverse(m.apply(p))
            worst = max(worst, abs(q.theta - p.theta), abs(q.r - p.r))
    return worst <= 1e-12, f"max roundtrip error = {worst:.3e}"


def check_twistmap_generating(factory) -> tuple[bool, str]:
    worst = 0.0
    for K in (0.0, 1.0, 2.0):
        m = factory(K)
        for p in _sample_points(40, seed=13):
            worst = max(worst, generating_residual(m, p))
    return worst <= 1e-10, f"max generating residual = {worst:.3e}"


def check_twistmap_equivariance(factory) -> tuple[bool, str]:
    # The kick is evaluated on the reduced angle, so the only defect left
    # is addition rounding of the shifted lift.
    worst = 0.0
    m = factory(1.7)
    for p in _sample_points(40, seed=17):
        a = m.apply_lift(LiftedPoint(p.theta + 1.0, p.r))
        b = m.apply_lift(LiftedPoint(p.theta, p.r))
        worst = max(worst, abs(a.theta_lift - b.theta_lift - 1.0),
                    abs(a.r - b.r))
    return worst <= 1e-12, f"deck-equivariance defect = {worst:.3e}"


def check_twistmap_twist(factory) -> tuple[bool, str]:
    rep = verify_twist(factory(3.0), 400)
    return rep.ok and min(rep.min_forward, rep.min_backward) > 0.0, (
        f"min twist derivatives = ({rep.min_forward:.3e},"
        f" {rep.min_backward:.3e}), witness={rep.witness}"
    )


def check_twistmap_jacobian_fd(factory) -> tuple[bool, str]:
    worst = 0.0
    for K in (0.3, 1.2, 2.5):
        m = factory(K)
        for p in _sample_points(15, seed=19):
            err = float(np.max(np.abs(m.jacobian(p).as_array() - jacobian_fd(m, p))))
            worst = max(worst, err)
    return worst <= 1e-6, f"max FD mismatch = {worst:.3e}"


def check_aubry_integrable(factory) -> tuple[bool, str]:
    m = factory(0.0)
    cfg = aubry.minimize_orbit(m, Fraction(3, 7))
    orbit = aubry.orbit_points(m, cfg)
    spread = float(np.max(np.abs(np.diff(cfg.thetas) - 3.0 / 7.0)))
    r_err = float(np.max(np.abs(orbit.rs - 3.0 / 7.0)))
    rot = aubry.rotation_number_estimate(m, Point(0.1, 0.3), 1000)
    ok = (
        cfg.n_iters == 0 and spread <= 1e-12 and r_err <= 1e-12
        and abs(rot - 0.3) <= 1e-12
    )
    return ok, (
        f"iters={cfg.n_iters}, equispacing defect={spread:.2e},"
        f" r defect={r_err:.2e}, rotation err={abs(rot - 0.3):.2e}"
    )


def check_aubry_minimizer(factory) -> tuple[bool, str]:
    m = factory(1.5)
    cfg = aubry.minimize_orbit(m, Fraction(13, 21))
    orbit = aubry.orbit_points(m, cfg)
    lam = aubry.smallest_eigenvalue(aubry.action_hessian(m, cfg))
    eq_action = aubry.action(m, aubry.equispaced(Fraction(13, 21)))
    ok = (
        cfg.grad_norm <= 1e-11
        and aubry.check_ordered(orbit).ok
        and lam >= -1e-8
        and orbit.closure_residual <= 1e-9
        and aubry.action(m, cfg) <= eq_action
    )
    return ok, (
        f"grad={cfg.grad_norm:.2e}, lam_min={lam:.2e},"
        f" closure={orbit.closure_residual:.2e}"
    )


def check_green_integrable(factory) -> tuple[bool, str]:
    m = factory(0.0)
    x = Point(0.3, 0.77)
    seq = green.slope_sequences(m, x, 32)
    n = np.arange(1, 33)
    err_f = float(np.max(np.abs(seq.forward - 1.0 / n)))
    err_b = float(np.max(np.abs(seq.backward + 1.0 / n)))
    bn = green.growth_b_n(m, x, 32)
    err_bn = float(np.max(np.abs(bn.b - n)))
    ok = max(err_f, err_b, err_bn) <= 1e-12
    return ok, f"max closed-form error = {max(err_f, err_b, err_bn):.3e}"


def check_green_interlacing(factory) -> tuple[bool, str]:
    m = factory(1.5)
    orbit = aubry.orbit_points(m, aubry.minimize_orbit(m, Fraction(34, 55)))
    worst = -math.inf
    for i in range(orbit.q):
        seq = green.slope_sequences(m, orbit.trajectory(m, i), 32)
        worst = max(worst, seq.interlacing_violation())
    return worst <= 1e-12, f"worst interlacing violation = {worst:.3e}"


def check_green_slope_bound(factory) -> tuple[bool, str]:
    m = factory(1.5)
    orbit = aubry.orbit_points(m, aubry.minimize_orbit(m, Fraction(13, 21)))
    bound = -math.inf
    seqs = []
    for i in range(orbit.q):
        seq = green.slope_sequences(m, orbit.trajectory(m, i), 32)
        seqs.append(seq)
        bound = max(bound, abs(seq.forward[0]), abs(seq.backward[0]))
    worst = max(
        max(float(np.max(np.abs(s.forward))), float(np.max(np.abs(s.backward))))
        for s in seqs
    )
    return worst <= bound + 1e-12, (
        f"max |s_n| = {worst:.6f} vs first-step bound {bound:.6f}"
    )


def check_cocycle_closed_forms(factory) -> tuple[bool, str]:
    est = cocycle.lyapunov_qr(cocycle.CocycleSource.hyperbolic(math.log(2)), 2000)
    err_h = abs(est.lam - math.log(2))
    est_r = cocycle.lyapunov_qr(cocycle.CocycleSource.rotation(1.1), 20000)
    verdicts = [
        cocycle.quasi_hyperbolicity_scan(src, 50, 32).classification
        for src in (
            cocycle.CocycleSource.hyperbolic(math.log(2)),
            cocycle.CocycleSource.shear(),
            cocycle.CocycleSource.rotation(0.7),
        )
    ]
    ok = (
        err_h <= 1e-9
        and est_r.lam <= 1e-6
        and verdicts == ["quasi-hyperbolic", "not", "not"]
    )
    return ok, f"|lam - ln2| = {err_h:.2e}, rotation lam = {est_r.lam:.2e}, QH = {verdicts}"


def check_regularity_fixtures(factory) -> tuple[bool, str]:
    th = np.linspace(0, 1, 100, endpoint=False)
    flat = regularity.PointCloud(th, np.full(100, 0.25))
    cone_flat = regularity.cone_estimate(flat, Point(0.5, 0.25))
    th2 = np.linspace(0.4, 0.6, 161)
    vee = regularity.PointCloud(th2, np.abs(th2 - 0.5))
    cone_vee = regularity.cone_estimate(vee, Point(0.5, 0.0))
    perm = np.random.default_rng(3).permutation(len(th2))
    vee_p = regularity.PointCloud(th2[perm], np.abs(th2 - 0.5)[perm])
    cone_vee_p = regularity.cone_estimate(vee_p, Point(0.5, 0.0))
    ok = (
        cone_flat.angular_width == 0.0
        and abs(cone_vee.lo + 1.0) <= 0.05
        and abs(cone_vee.hi - 1.0) <= 0.05
        and cone_vee_p.slope_interval == cone_vee.slope_interval
    )
    return ok, (
        f"flat width={cone_flat.angular_width}, vee=[{cone_vee.lo:.3f},"
        f" {cone_vee.hi:.3f}], permutation invariant="
        f"{cone_vee_p.slope_interval == cone_vee.slope_interval}"
    )


def check_conjugacy_rotation(factory) -> tuple[bool, str]:
    m = factory(0.0)
    orbit = aubry.orbit_points(m, aubry.minimize_orbit(m, Fraction(34, 55)))
    sample = conjugacy.build_conjugacy(orbit)
    est = conjugacy.lambda_estimate(sample, [1, 2, 3, 4, 6, 8])
    ok = abs(est.Lambda) <= 1e-12 and sample.degree_one_defect() <= 1e-12
    return ok, f"Lambda = {est.Lambda:.2e}, degree-1 defect = {sample.degree_one_defect():.2e}"


def check_config_roundtrip(factory) -> tuple[bool, str]:
    from .config import ExperimentConfig, RotationTarget, from_ini, to_ini

    cfg = ExperimentConfig(
        K=1.2345678901234567,
        rotation=RotationTarget(rational=Fraction(13, 21)),
        tol_cauchy=3.333e-10,
        seed=42,
    )
    text = to_ini(cfg)
    again = to_ini(from_ini(text))
    return text == again, "ini -> config -> ini stable" if text == again else "round trip drifted"


def check_json_determinism(factory) -> tuple[bool, str]:
    from .io import canonical_json

    a = canonical_json({"b": 1.0 / 3.0, "a": [1, 2.5e-17, "x"], "c": None})
    b = canonical_json({"c": None, "a": [1, 2.5e-17, "x"], "b": 1.0 / 3.0})
    return a == b, "key order independent" if a == b else f"{a} != {b}"


def check_full_hyperbolic(factory) -> tuple[bool, str]:
    m = factory(2.0)
    orbit = aubry.am_set_approx(m, NAMED_IRRATIONALS["golden"], 8)
    limits = [
        green.green_limits(m, orbit.trajectory(m, i)) for i in range(orbit.q)
    ]
    gap_min = min(l.gap for l in limits)
    res_max = max(l.cauchy_residual for l in limits)
    src = cocycle.CocycleSource.from_orbit(m, orbit.trajectory(m))
    est = cocycle.lyapunov_qr(src, 5000)
    lam_green = cocycle.green_lyapunov_estimate(m, orbit.trajectory(m), 200, limits[0])
    table = cocycle.compare_green_oseledets(m, orbit, 22)
    ok = (
        all(l.converged for l in limits)
        and gap_min > 10 * res_max
        and est.lam > 3 * est.ci_halfwidth
        and abs(lam_green - est.lam) / est.lam < 0.05
        and table.max_residual < 1e-3
    )
    return ok, (
        f"gap_min={gap_min:.3f}, lam={est.lam:.4f}+-{est.ci_halfwidth:.1e},"
        f" lam_green={lam_green:.4f}, oseledets residual={table.max_residual:.2e}"
    )


def check_full_curve(factory) -> tuple[bool, str]:
    m = factory(0.3)
    orbit = aubry.am_set_approx(m, NAMED_IRRATIONALS["golden"], 11)
    cloud = regularity.PointCloud.from_orbit(orbit)
    table = [green.green_limits(m, orbit.trajectory(m, i)) for i in range(orbit.q)]
    rep = regularity.regularity_report(cloud, table)
    ok = (
        rep.regular_fraction >= 0.9
        and rep.containment_fraction is not None
        and rep.containment_fraction >= 0.95
    )
    return ok, (
        f"regular={rep.regular_fraction:.3f},"
        f" containment={rep.containment_fraction:.3f}"
    )


def check_full_irregular(factory) -> tuple[bool, str]:
    m = factory(2.0)
    orbit = aubry.am_set_approx(m, NAMED_IRRATIONALS["golden"], 8)
    cloud = regularity.PointCloud.from_orbit(orbit)
    table = [green.green_limits(m, orbit.trajectory(m, i)) for i in range(orbit.q)]
    rep = regularity.regularity_report(cloud, table)
    two = rep.two_direction_fraction
    ok = two is not None and two >= 0.9 and rep.regular_fraction < 0.1
    return ok, f"two_direction={two}, regular={rep.regular_fraction:.3f}"


def check_full_cone_monotone(factory) -> tuple[bool, str]:
    widths = []
    for K in (0.1, 0.2, 0.3):
        m = factory(K)
        orbit = aubry.am_set_approx(m, NAMED_IRRATIONALS["golden"], 10)
        cloud = regularity.PointCloud.from_orbit(orbit)
        per_point = []
        for i in range(orbit.q):
            try:
                per_point.append(
                    regularity.cone_estimate(cloud, cloud.point(i)).angular_width
                )
            except regularity.SparseCloudError:
                continue
        widths.append(max(per_point))
    ok = widths[0] <= widths[1] <= widths[2]
    return ok, f"max widths K=0.1/0.2/0.3: {[f'{w:.4f}' for w in widths]}"


QUICK_CHECKS = [
    ("twistmap.det", check_twistmap_det),
    ("twistmap.roundtrip", check_twistmap_roundtrip),
    ("twistmap.generating", check_twistmap_generating),
    ("twistmap.equivariance", check_twistmap_equivariance),
    ("twistmap.twist", check_twistmap_twist),
    ("twistmap.jacobian_fd", check_twistmap_jacobian_fd),
    ("aubry.integrable", check_aubry_integrable),
    ("aubry.minimizer", check_aubry_minimizer),
    ("green.integrable", check_green_integrable),
    ("green.interlacing", check_green_interlacing),
    ("green.slope_bound", check_green_slope_bound),
    ("cocycle.closed_forms", check_cocycle_closed_forms),
    ("regularity.fixtures", check_regularity_fixtures),
    ("conjugacy.rotation", check_conjugacy_rotation),
    ("lab.config_roundtrip", check_config_roundtrip),
    ("lab.json_determinism", check_json_determinism),
]

FULL_CHECKS = QUICK_CHECKS + [
    ("dichotomy.hyperbolic", check_full_hyperbolic),
    ("dichotomy.curve", check_full_curve),
    ("dichotomy.irregular", check_full_irregular),
    ("cones.monotone_in_K", check_full_cone_monotone),
]


def run_suite(level: str = "quick", map_factory=StandardMap) -> VerifyReport:
    if level not in ("quick", "full"):
        raise ValueError(f"level must be quick or full, got {level!r}")
    checks = QUICK_CHECKS if level == "quick" else FULL_CHECKS
    results = []
    for name, fn in checks:
        t0 = time.time()
        try:
            ok, detail = fn(map_factory)
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, ok, detail, time.time() - t0))
    return VerifyReport(level, results)
