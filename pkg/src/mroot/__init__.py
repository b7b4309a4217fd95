"""Curvature engine for m-th root Cartan metrics."""

__version__ = "0.1.0"
