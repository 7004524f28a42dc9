"""Inversive (Moebius) curve geometry and the inversive curve-lengthening flow."""

from .errors import InversiveError
from .mobius import (
    INFINITY,
    MobiusMap,
    MonodromyClass,
    ProjectivePoint,
    apply,
    compose,
    normal_form,
    stereographic,
)

__all__ = [
    "INFINITY",
    "InversiveError",
    "MobiusMap",
    "MonodromyClass",
    "ProjectivePoint",
    "apply",
    "compose",
    "normal_form",
    "stereographic",
]

__version__ = "0.1.0"
