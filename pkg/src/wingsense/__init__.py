"""Sparse neural-inspired strain sensing on a simulated flapping wing."""

__version__ = "0.1.0"
