"""Experiment orchestration: the work behind each CLI subcommand.

Every function is deterministic given its config; scan rows are sorted
by (K, p, q) regardless of execution order so reruns are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import aubry, cocycle, conjugacy, green, regularity
from ..aubry import OrderedOrbit
from ..green import GreenSetViolation
from ..twistmap import StandardMap, TwistMap
from .config import ConfigError, ExperimentConfig
from .io import orbit_to_doc

FAMILIES = {"standard": StandardMap}


def make_map(cfg: ExperimentConfig, K: float | None = None) -> TwistMap:
    try:
        factory = FAMILIES[cfg.family]
    except KeyError:
        raise ConfigError(
            f"unknown family {cfg.family!r}; known: {sorted(FAMILIES)}"
        ) from None
    return factory(cfg.K if K is None else K)


def compute_orbit(cfg: ExperimentConfig, K: float | None = None) -> OrderedOrbit:
    m = make_map(cfg, K)
    rot = cfg.rotation
    if rot.is_rational:
        config = aubry.minimize_orbit(
            m, rot.rational, cfg.init_strategy, cfg.tol_grad, cfg.max_iters
        )
        return aubry.orbit_points(m, config)
    return aubry.am_set_approx(
        m, rot.value, rot.depth, cfg.init_strategy, cfg.tol_grad
    )


def run_orbit(cfg: ExperimentConfig) -> dict:
    orbit = compute_orbit(cfg)
    return orbit_to_doc(cfg.family, cfg.K, orbit)


def _orbit_and_map(doc: dict, cfg: ExperimentConfig):
    from .io import orbit_from_doc

    orbit = orbit_from_doc(doc)
    m = FAMILIES[doc["family"]](float(doc["K"]))
    return orbit, m


def green_table_for(m, orbit, cfg: ExperimentConfig) -> list[green.GreenLimits]:
    return [
        green.green_limits(m, orbit.trajectory(m, i), cfg.n_max, cfg.tol_cauchy)
        for i in range(orbit.q)
    ]


def add_green(doc: dict, cfg: ExperimentConfig) -> dict:
    """Attach per-point slope sequences and limits under the "green" key."""
    orbit, m = _orbit_and_map(doc, cfg)
    points = []
    for i in range(orbit.q):
        traj = orbit.trajectory(m, i)
        seq = green.slope_sequences(m, traj, cfg.n_max)
        lim = green.green_limits(m, traj, cfg.n_max, cfg.tol_cauchy)
        points.append(
            {
                "s_fwd": list(seq.forward),
                "s_bwd": list(seq.backward),
                "s_plus": lim.s_plus,
                "s_minus": lim.s_minus,
                "gap": lim.gap,
                "n_used": lim.n_used,
                "residual": lim.cauchy_residual,
                "converged": lim.converged,
            }
        )
    doc = dict(doc)
    doc["green"] = {"n_max": cfg.n_max, "tol_cauchy": cfg.tol_cauchy,
                    "points": points}
    return doc


def add_lyapunov(doc: dict, cfg: ExperimentConfig) -> dict:
    """Attach exponent estimates and the base-point splitting ("cocycle")."""
    orbit, m = _orbit_and_map(doc, cfg)
    traj = orbit.trajectory(m)
    src = cocycle.CocycleSource.from_orbit(m, traj)
    fwd = cocycle.lyapunov_qr(src, cfg.lyapunov_n, cfg.renorm_every)
    bwd = cocycle.lyapunov_qr(src.reversed(), cfg.lyapunov_n, cfg.renorm_every)
    block: dict = {
        "lambda_qr": fwd.lam,
        "lambda_qr_backward": bwd.lam,
        "ci_halfwidth": fwd.ci_halfwidth,
        "n": fwd.n,
        "renorm_count": fwd.renorm_count,
    }
    try:
        lim = green.green_limits(m, traj, cfg.n_max, cfg.tol_cauchy)
        block["lambda_green"] = cocycle.green_lyapunov_estimate(
            m, traj, cfg.green_lyapunov_n, lim
        )
    except GreenSetViolation as exc:
        block["lambda_green"] = None
        block["lambda_green_error"] = str(exc)
    split = cocycle.oseledets_directions(src, cfg.oseledets_n)
    block["oseledets"] = {
        "e_s_angle": split.e_s.angle,
        "e_u_angle": split.e_u.angle,
        "angle_gap": split.angle_gap,
        "conclusive": split.conclusive,
    }
    doc = dict(doc)
    doc["cocycle"] = block
    return doc


def cone_rows(doc: dict, cfg: ExperimentConfig):
    """Cone table (CSV rows) and its summary block.

    Columns: index, theta, r, then per-rung lo/hi pairs (empty cells for
    unpopulated rungs), extrapolated lo/hi, width, verdicts.
    """
    orbit, m = _orbit_and_map(doc, cfg)
    cloud = regularity.PointCloud.from_orbit(orbit)
    table = green_table_for(m, orbit, cfg)
    scales = regularity.default_scales(cfg.scale_top, cfg.n_scales)
    header = ["index", "theta", "r"]
    for s in scales:
        header += [f"lo_{s:.6g}", f"hi_{s:.6g}"]
    header += ["lo", "hi", "width", "regular", "contained"]
    rows = []
    report = regularity.regularity_report(
        cloud,
        table,
        scales,
        cfg.width_threshold,
        two_direction_delta_factor=cfg.two_direction_delta_factor,
    )
    for i in range(len(cloud)):
        row: list = [i, cloud.thetas[i], cloud.rs[i]]
        try:
            cone = regularity.cone_estimate(cloud, cloud.point(i), scales)
        except regularity.SparseCloudError:
            row += [""] * (2 * len(scales) + 5 - 3)
            rows.append(row)
            continue
        hulls = {round(s, 12): (lo, hi) for s, lo, hi in cone.per_scale}
        for s in scales:
            lo_hi = hulls.get(round(float(s), 12))
            row += ["" if lo_hi is None else lo_hi[0],
                    "" if lo_hi is None else lo_hi[1]]
        lim = table[i]
        delta = max(0.05 * lim.gap, 0.02)
        verdict = regularity.cone_vs_green(cone, lim, delta)
        row += [
            cone.lo,
            cone.hi,
            cone.angular_width,
            int(cone.angular_width < cfg.width_threshold),
            int(verdict.contained),
        ]
        rows.append(row)
    if report.n_sparse == len(cloud):
        raise regularity.SparseCloudError(
            f"no cone could be estimated on this {len(cloud)}-point cloud;"
            " deepen the convergent (larger q) and rerun"
        )
    summary = {
        "regular_fraction": report.regular_fraction,
        "containment_fraction": report.containment_fraction,
        "two_direction_fraction": report.two_direction_fraction,
        "max_width": report.max_width,
        "median_width": report.median_width,
        "n_sparse": report.n_sparse,
    }
    return header, rows, summary


def add_conjugacy(doc: dict, cfg: ExperimentConfig, n_list=None) -> dict:
    orbit, m = _orbit_and_map(doc, cfg)
    sample = conjugacy.build_conjugacy(orbit)
    n_list = n_list or [1, 2, 3, 4, 6, 8, 12, 16]
    est = conjugacy.lambda_estimate(sample, n_list)
    doc = dict(doc)
    doc["conjugacy"] = {
        "n_list": est.n_list,
        "means": est.means,
        "counts": est.counts,
        "Lambda": est.Lambda,
        "inf_normalized_mean": est.inf_normalized_mean,
        "scale": conjugacy.default_scale(sample),
        "sparse_warnings": est.sparse_warnings,
    }
    return doc


@dataclass
class ScanRow:
    K: float
    p: int
    q: int
    gap_min: float
    gap_median: float
    residual_max: float
    all_converged: bool
    lambda_qr: float
    lambda_ci: float
    lambda_green: float | None
    width_max: float
    width_median: float
    regular_fraction: float
    classification: str
    error: str = ""


SCAN_HEADER = [
    "K", "p", "q", "gap_min", "gap_median", "residual_max", "all_converged",
    "lambda_qr", "lambda_ci", "lambda_green", "width_max", "width_median",
    "regular_fraction", "classification", "error",
]


def classify(
    gap_min: float,
    residual_max: float,
    all_converged: bool,
    lam: float,
    ci: float,
    cfg: ExperimentConfig,
) -> str:
    """Pure function of the row's numeric fields and config thresholds."""
    gap_resolved = all_converged and gap_min > cfg.gap_residual_factor * residual_max
    lam_positive = lam > cfg.lambda_ci_factor * ci
    if gap_resolved and lam_positive:
        return "hyperbolic"
    gap_zeroish = (not all_converged) or gap_min <= cfg.gap_residual_factor * residual_max
    lam_zeroish = lam <= cfg.lambda_ci_factor * ci
    if gap_zeroish and lam_zeroish:
        return "curve-like"
    return "inconclusive"


def scan_cell(cfg: ExperimentConfig, K: float) -> ScanRow:
    rot = cfg.rotation
    try:
        m = make_map(cfg, K)
        orbit = compute_orbit(cfg, K)
        table = green_table_for(m, orbit, cfg)
        gaps = np.array([t.gap for t in table])
        residual_max = max(t.cauchy_residual for t in table)
        all_converged = all(t.converged for t in table)
        src = cocycle.CocycleSource.from_orbit(m, orbit.trajectory(m))
        est = cocycle.lyapunov_qr(src, cfg.lyapunov_n, cfg.renorm_every)
        try:
            lam_green = cocycle.green_lyapunov_estimate(
                m, orbit.trajectory(m), cfg.green_lyapunov_n, table[0]
            )
        except GreenSetViolation:
            lam_green = None
        cloud = regularity.PointCloud.from_orbit(orbit)
        report = regularity.regularity_report(
            cloud,
            table,
            regularity.default_scales(cfg.scale_top, cfg.n_scales),
            cfg.width_threshold,
            two_direction_delta_factor=cfg.two_direction_delta_factor,
        )
        return ScanRow(
            K=K,
            p=orbit.p,
            q=orbit.q,
            gap_min=float(np.min(gaps)),
            gap_median=float(np.median(gaps)),
            residual_max=residual_max,
            all_converged=all_converged,
            lambda_qr=est.lam,
            lambda_ci=est.ci_halfwidth,
            lambda_green=lam_green,
            width_max=report.max_width,
            width_median=report.median_width,
            regular_fraction=report.regular_fraction,
            classification=classify(
                float(np.min(gaps)), residual_max, all_converged,
                est.lam, est.ci_halfwidth, cfg,
            ),
        )
    except Exception as exc:  # per-cell failure: recorded in-row, scan continues
        p, q = (rot.rational.numerator, rot.rational.denominator) if rot.is_rational else (0, 0)
        return ScanRow(
            K=K, p=p, q=q,
            gap_min=math.nan, gap_median=math.nan, residual_max=math.nan,
            all_converged=False, lambda_qr=math.nan, lambda_ci=math.nan,
            lambda_green=None, width_max=math.nan, width_median=math.nan,
            regular_fraction=math.nan, classification="error",
            error=f"{type(exc).__name__}: {exc}",
        )


def run_scan(cfg: ExperimentConfig) -> list[ScanRow]:
    rows = [scan_cell(cfg, K) for K in cfg.k_values()]
    rows.sort(key=lambda r: (r.K, r.p, r.q))
    return rows


def scan_rows_csv(rows: list[ScanRow]) -> list[list]:
    out = []
    for r in rows:
        out.append([
            r.K, r.p, r.q, r.gap_min, r.gap_median, r.residual_max,
            int(r.all_converged), r.lambda_qr, r.lambda_ci,
            "" if r.lambda_green is None else r.lambda_green,
            r.width_max, r.width_median, r.regular_fraction,
            r.classification, r.error,
        ])
    return out
