"""Bases of words for time-augmented signatures."""

__version__ = "0.1.0"
