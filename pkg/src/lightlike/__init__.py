"""Tractor calculus for lightlike manifolds on a single chart."""

__version__ = "0.1.0"
