"""Exact construction and verification of Duffin-Schaeffer-type counterexample blocks."""

from __future__ import annotations

from .errors import DSLabError
from .functions import ApproxFunction, parse_function
from .torus import TorusIntervalSet, approx_set, normalize, union_measure

__all__ = ["DSLabError", "ApproxFunction", "parse_function", "TorusIntervalSet",
           "approx_set", "normalize", "union_measure"]
__version__ = "0.1.0"
