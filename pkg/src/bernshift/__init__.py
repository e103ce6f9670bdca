"""Numerical laboratory for half-stationary non-singular Bernoulli shifts."""

__version__ = "0.1.0"
