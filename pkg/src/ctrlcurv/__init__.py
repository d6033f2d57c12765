"""Feedback invariants of planar control systems."""

__version__ = "0.1.0"
