"""Certified lower bounds for input-constrained LQ control via point-wise maxima of quadratics."""

__version__ = "0.1.0"
