"""Potts and random-cluster dynamics on random regular graphs."""

__version__ = "0.1.0"
