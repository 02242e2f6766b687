"""Numerical curvature engine for almost contact metric manifolds and (kappa, mu, nu)-spaces."""

__version__ = "0.1.0"
