"""Command-line interface.

Subcommands: orbit, green, lyapunov, cone, conjugacy, scan, verify.
Exit codes: 0 success, 1 computation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from ..aubry import MinimizationError, OrderingError
from ..green import GreenSetViolation
from ..regularity import SparseCloudError
from . import pipeline
from .config import ConfigError, ExperimentConfig, RotationTarget, from_ini
from .io import SchemaError, read_json, write_csv, write_json

COMPUTE_ERRORS = (
    MinimizationError,
    OrderingError,
    GreenSetViolation,
    SparseCloudError,
    FloatingPointError,
)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="twistlab",
        description="Twist-map laboratory: minimizing orbits, Green bundles,"
        " exponents, cones.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, orbit_input: bool = False):
        p.add_argument("--config", help="experiment config file (key = value)")
        p.add_argument("--K", type=float, help="coupling override")
        p.add_argument("--rational", help="rotation number p/q")
        p.add_argument("--irrational", help="named irrational (golden, silver)")
        p.add_argument("--depth", type=int, help="convergent depth")
        p.add_argument("--output-dir", help="output directory override")
        if orbit_input:
            p.add_argument("orbit_file", help="orbit JSON produced by `orbit`")

    common(sub.add_parser("orbit", help="minimize an orbit, write orbit JSON"))
    common(sub.add_parser("green", help="attach Green slope data"), True)
    common(sub.add_parser("lyapunov", help="attach exponent estimates"), True)
    common(sub.add_parser("cone", help="write the cone table CSV"), True)
    common(sub.add_parser("conjugacy", help="attach circle-map statistics"), True)
    common(sub.add_parser("scan", help="K-scan, write scan CSV"))
    ver = sub.add_parser("verify", help="run the invariant suite")
    ver.add_argument("--level", choices=("quick", "full"), default="quick")
    ver.add_argument("--output-dir", help="output directory override")
    ver.add_argument("--report", help="write the machine-readable report here")
    return top


def load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = from_ini(fh.read())
    else:
        cfg = ExperimentConfig()
    if getattr(args, "K", None) is not None:
        cfg.K = args.K
    rational = getattr(args, "rational", None)
    irrational = getattr(args, "irrational", None)
    depth = getattr(args, "depth", None)
    if rational and irrational:
        raise ConfigError("--rational and --irrational are exclusive")
    if rational:
        p_str, q_str = rational.split("/")
        cfg.rotation = RotationTarget(rational=Fraction(int(p_str), int(q_str)))
    elif irrational:
        from ..aubry import NAMED_IRRATIONALS

        if irrational not in NAMED_IRRATIONALS:
            raise ConfigError(f"unknown irrational {irrational!r}")
        cfg.rotation = RotationTarget(
            value=NAMED_IRRATIONALS[irrational],
            irrational_name=irrational,
            depth=depth or cfg.rotation.depth,
        )
    elif depth is not None:
        if cfg.rotation.is_rational:
            raise ConfigError("--depth applies to irrational targets only")
        cfg.rotation.depth = depth
    if getattr(args, "output_dir", None):
        cfg.output_dir = args.output_dir
    cfg.__post_init__()  # re-validate after overrides
    return cfg


def _out_path(cfg: ExperimentConfig, stem: str, ext: str) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, f"{stem}.{ext}")


def _orbit_stem(cfg: ExperimentConfig) -> str:
    return f"orbit_{cfg.family}_K{cfg.K:g}_{cfg.rotation.label()}"


def cmd_orbit(args) -> int:
    cfg = load_config(args)
    doc = pipeline.run_orbit(cfg)
    path = _out_path(cfg, _orbit_stem(cfg), "json")
    write_json(doc, path)
    print(path)
    return 0


def _augment(args, key: str, fn) -> int:
    cfg = load_config(args)
    doc = read_json(args.orbit_file)
    doc = fn(doc, cfg)
    write_json(doc, args.orbit_file)
    print(f"{args.orbit_file}: added {key!r}")
    return 0


def cmd_green(args) -> int:
    return _augment(args, "green", pipeline.add_green)


def cmd_lyapunov(args) -> int:
    return _augment(args, "cocycle", pipeline.add_lyapunov)


def cmd_cone(args) -> int:
    cfg = load_config(args)
    doc = read_json(args.orbit_file)
    header, rows, summary = pipeline.cone_rows(doc, cfg)
    base, _ = os.path.splitext(args.orbit_file)
    csv_path = base + "_cone.csv"
    write_csv(csv_path, header, rows)
    doc = dict(doc)
    doc["cone"] = summary
    write_json(doc, args.orbit_file)
    print(csv_path)
    return 0


def cmd_conjugacy(args) -> int:
    return _augment(args, "conjugacy", pipeline.add_conjugacy)


def cmd_scan(args) -> int:
    cfg = load_config(args)
    rows = pipeline.run_scan(cfg)
    path = _out_path(cfg, f"scan_{cfg.family}_{cfg.rotation.label()}", "csv")
    write_csv(path, pipeline.SCAN_HEADER, pipeline.scan_rows_csv(rows))
    failures = [r for r in rows if r.classification == "error"]
    print(path)
    for r in failures:
        print(f"  cell K={r.K:g} failed: {r.error}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suite

    report = run_suite(args.level)
    for r in report.results:
        status = "PASS" if r.ok else "FAIL"
        print(f"[{status}] {r.name} ({r.seconds:.2f}s): {r.detail}")
    if args.report:
        write_json(report.to_doc(), args.report)
    print(f"verify {report.level}: {'PASS' if report.ok else 'FAIL'}")
    return 0 if report.ok else 1


COMMANDS = {
    "orbit": cmd_orbit,
    "green": cmd_green,
    "lyapunov": cmd_lyapunov,
    "cone": cmd_cone,
    "conjugacy": cmd_conjugacy,
    "scan": cmd_scan,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except COMPUTE_ERRORS as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
