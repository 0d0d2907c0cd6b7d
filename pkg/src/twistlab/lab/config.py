"""Experiment configuration: a sectioned key = value file (INI).

One documented plain-text format; every tolerance has a default and can
be overridden per run.  The only environment override honored anywhere
is TWISTLAB_OUTPUT_DIR for the output directory.
"""

from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import dataclass, field, fields
from fractions import Fraction

from ..aubry import NAMED_IRRATIONALS


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class RotationTarget:
    """Rational p/q, or an irrational value approximated at a depth."""

    rational: Fraction | None = None
    irrational_name: str | None = None
    value: float | None = None
    depth: int = 8

    def __post_init__(self) -> None:
        if self.rational is None and self.value is None:
            raise ConfigError("rotation target needs 'rational' or an irrational")
        if self.rational is not None and self.value is not None:
            raise ConfigError("rotation target cannot be both rational and irrational")
        if self.rational is None and self.depth < 3:
            raise ConfigError("irrational targets need depth >= 3")

    @property
    def is_rational(self) -> bool:
        return self.rational is not None

    def label(self) -> str:
        if self.rational is not None:
            return f"{self.rational.numerator}_{self.rational.denominator}"
        if self.irrational_name:
            return f"{self.irrational_name}_d{self.depth}"
        return f"v{self.value:.6f}_d{self.depth}"


@dataclass
class ExperimentConfig:
    family: str = "standard"
    K: float = 1.0
    K_max: float | None = None  # presence of K_max/K_step makes a scan range
    K_step: float | None = None
    rotation: RotationTarget = field(
        default_factory=lambda: RotationTarget(value=NAMED_IRRATIONALS["golden"],
                                               irrational_name="golden")
    )
    # tolerances (spec defaults)
    tol_grad: float = 1e-11
    tol_cauchy: float = 1e-9
    n_max: int = 64
    max_iters: int = 200
    init_strategy: str = "equispaced"
    # lyapunov
    lyapunov_n: int = 5000
    renorm_every: int = 20
    green_lyapunov_n: int = 200
    oseledets_n: int = 22
    # cone
    scale_top: float = 0.1
    n_scales: int = 6
    width_threshold: float = 0.02
    two_direction_delta_factor: float = 0.1
    # scan classification thresholds
    gap_residual_factor: float = 10.0
    lambda_ci_factor: float = 3.0
    # misc
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.K < 0 or not math.isfinite(self.K):
            raise ConfigError(f"K must be finite and >= 0, got {self.K}")
        for name in ("tol_grad", "tol_cauchy", "scale_top", "width_threshold"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.K_max is not None:
            if self.K_step is None or self.K_step <= 0:
                raise ConfigError("K ranges need a positive K_step")
            if self.K_max < self.K:
                raise ConfigError("empty K range (K_max < K)")
        env_dir = os.environ.get("TWISTLAB_OUTPUT_DIR")
        if env_dir:
            self.output_dir = env_dir

    def k_values(self) -> list[float]:
        if self.K_max is None:
            return [self.K]
        out = []
        k = self.K
        while k <= self.K_max + 1e-12:
            out.append(round(k, 12))
            k += self.K_step
        return out


_SKIP_KEYS = {"rotation", "K_max", "K_step"}


def to_ini(cfg: ExperimentConfig) -> str:
    """Lossless text form; floats are written with 17 significant digits."""
    cp = configparser.ConfigParser()
    cp["map"] = {"family": cfg.family, "K": f"{cfg.K:.17g}"}
    if cfg.K_max is not None:
        cp["map"]["K_max"] = f"{cfg.K_max:.17g}"
        cp["map"]["K_step"] = f"{cfg.K_step:.17g}"
    rot = {}
    if cfg.rotation.rational is not None:
        rot["rational"] = (
            f"{cfg.rotation.rational.numerator}/{cfg.rotation.rational.denominator}"
        )
    else:
        if cfg.rotation.irrational_name:
            rot["irrational"] = cfg.rotation.irrational_name
        else:
            rot["value"] = f"{cfg.rotation.value:.17g}"
        rot["depth"] = str(cfg.rotation.depth)
    cp["rotation"] = rot
    params = {}
    for f in fields(cfg):
        if f.name in ("family", "K") or f.name in _SKIP_KEYS:
            continue
        v = getattr(cfg, f.name)
        params[f.name] = f"{v:.17g}" if isinstance(v, float) else str(v)
    cp["parameters"] = params
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_ini(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    kwargs = {}
    if cp.has_section("map"):
        if cp.has_option("map", "family"):
            kwargs["family"] = cp.get("map", "family")
        if cp.has_option("map", "K"):
            kwargs["K"] = _get_float(cp, "map", "K")
        if cp.has_option("map", "K_max"):
            kwargs["K_max"] = _get_float(cp, "map", "K_max")
        if cp.has_option("map", "K_step"):
            kwargs["K_step"] = _get_float(cp, "map", "K_step")
    kwargs["rotation"] = _rotation_from(cp)
    if cp.has_section("parameters"):
        proto = ExperimentConfig(rotation=kwargs["rotation"])
        for key, raw in cp.items("parameters"):
            if not hasattr(proto, key) or key in _SKIP_KEYS:
                raise ConfigError(f"unknown parameter {key!r}")
            current = getattr(proto, key)
            if isinstance(current, bool):
                kwargs[key] = raw.strip().lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                kwargs[key] = int(raw)
            elif isinstance(current, float):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw
    return ExperimentConfig(**kwargs)


def _get_float(cp, section, key) -> float:
    try:
        return float(cp.get(section, key))
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} is not a number") from exc


def _rotation_from(cp: configparser.ConfigParser) -> RotationTarget:
    if not cp.has_section("rotation"):
        return RotationTarget(
            value=NAMED_IRRATIONALS["golden"], irrational_name="golden"
        )
    sec = cp["rotation"]
    depth = int(sec.get("depth", "8"))
    if "rational" in sec:
        raw = sec["rational"]
        try:
            p_str, q_str = raw.split("/")
            frac = Fraction(int(p_str), int(q_str))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad rational rotation number {raw!r}") from exc
        return RotationTarget(rational=frac, depth=depth)
    if "irrational" in sec:
        name = sec["irrational"].strip()
        if name not in NAMED_IRRATIONALS:
            raise ConfigError(
                f"unknown irrational {name!r}; known: {sorted(NAMED_IRRATIONALS)}"
            )
        return RotationTarget(
            value=NAMED_IRRATIONALS[name], irrational_name=name, depth=depth
        )
    if "value" in sec:
        return RotationTarget(value=_get_float(cp, "rotation", "value"), depth=depth)
    raise ConfigError("[rotation] needs rational=, irrational=, or value=")
