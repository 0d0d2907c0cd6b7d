"""Canonical serialization of results.

JSON is emitted by a small canonical writer (sorted keys, fixed
separators, floats at 17 significant digits) so identical runs produce
byte-identical files; CSV follows the same float convention.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np

from ..aubry import OrderedOrbit

ORBIT_FORMAT = "twistlab-orbit/1"


class SchemaError(ValueError):
    """Document does not carry the expected versioned format tag."""


def fmt_float(x: float) -> str:
    if isinstance(x, float) and not math.isfinite(x):
        # JSON has no literals for these; encode as strings.
        return json.dumps(str(x))
    return f"{x:.17g}"


def canonical_json(obj) -> str:
    """Deterministic JSON text (sorted keys, 17-digit floats)."""
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        inner = ",".join(f"{json.dumps(k)}:{canonical_json(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Fraction):
        return canonical_json({"p": obj.numerator, "q": obj.denominator})
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")


def read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def orbit_to_doc(family: str, K: float, orbit: OrderedOrbit) -> dict:
    rho: dict = {"p": orbit.p, "q": orbit.q}
    if orbit.rho_value is not None:
        rho["value"] = orbit.rho_value
        rho["depth"] = orbit.depth
    diagnostics = {
        "grad_norm": orbit.grad_norm,
        "lipschitz": orbit.lipschitz_bound,
        "closure_residual": orbit.closure_residual,
    }
    if orbit.hausdorff_proxy is not None:
        diagnostics["hausdorff_proxy"] = orbit.hausdorff_proxy
    if orbit.max_theta_gap is not None:
        diagnostics["max_theta_gap"] = orbit.max_theta_gap
    return {
        "format": ORBIT_FORMAT,
        "family": family,
        "K": K,
        "rho": rho,
        "thetas": list(orbit.thetas),
        "rs": list(orbit.rs),
        "diagnostics": diagnostics,
    }


def orbit_from_doc(doc: dict) -> OrderedOrbit:
    if doc.get("format") != ORBIT_FORMAT:
        raise SchemaError(
            f"expected format {ORBIT_FORMAT!r}, got {doc.get('format')!r}"
        )
    rho = doc["rho"]
    diag = doc.get("diagnostics", {})
    return OrderedOrbit(
        rho=Fraction(int(rho["p"]), int(rho["q"])),
        thetas=np.array(doc["thetas"], dtype=float),
        rs=np.array(doc["rs"], dtype=float),
        lipschitz_bound=float(diag.get("lipschitz", math.nan)),
        closure_residual=float(diag.get("closure_residual", math.nan)),
        grad_norm=diag.get("grad_norm"),
        hausdorff_proxy=diag.get("hausdorff_proxy"),
        max_theta_gap=diag.get("max_theta_gap"),
        rho_value=rho.get("value"),
        depth=rho.get("depth"),
    )


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (float, np.floating)):
                    cells.append(f"{float(v):.17g}")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
