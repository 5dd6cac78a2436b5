"""Compound-tree parallel rendering on a simulated cluster."""

__version__ = "0.1.0"
