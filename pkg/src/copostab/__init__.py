"""Exact copositivity-based stability certificates for discrete-time
linear complementarity systems."""

__version__ = "0.1.0"
