"""Cayley-graph geometry, first-passage walks and collective progress curves for n-cubes."""

__version__ = "0.1.0"
