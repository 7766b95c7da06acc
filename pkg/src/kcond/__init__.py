"""Numerical tools around the condensation threshold of random graph k-coloring."""
__version__ = "0.1.0"
