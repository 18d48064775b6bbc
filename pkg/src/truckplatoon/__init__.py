"""Fuel-optimal coordination of truck platoons by clustering pairwise plans."""

__version__ = "0.1.0"
