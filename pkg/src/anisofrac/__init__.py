"""Anisotropic mixed-order nonlocal operators: evaluation, barriers, a Dirichlet grid solver and estimate checks."""

__version__ = "0.1.0"
