"""Numerical laboratory for higher-order Riesz transforms on periodic grids."""

__version__ = "0.1.0"
