"""Numerical experiments with radial, chordal and two-sided radial SLE in the unit disk."""

from .params import SleParams, Variant, make_params

__version__ = "0.1.0"

__all__ = ["SleParams", "Variant", "make_params", "__version__"]
