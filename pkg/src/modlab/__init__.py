"""Numerical toolkit for modulation norms, semigroup kernels and maximal functions."""

__version__ = "0.1.0"
