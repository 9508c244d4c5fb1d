"""Circular first-order intuitionistic linear logic with fixed points, and session processes."""

__version__ = "0.1.0"
