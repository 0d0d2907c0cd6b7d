"""Numerical laboratory for exact symplectic twist maps of the annulus."""

from .twistmap import Point, LiftedPoint, Jacobian, StandardMap, TwistMap

__all__ = ["Point", "LiftedPoint", "Jacobian", "StandardMap", "TwistMap"]
__version__ = "0.1.0"
