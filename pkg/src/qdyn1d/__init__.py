"""Numerical laboratory for discrete one-dimensional Schrodinger operators."""

__version__ = "0.1.0"
