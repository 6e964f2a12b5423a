"""Tail bounds for the path length and Wiener index of random recursive trees."""

__version__ = "0.1.0"
