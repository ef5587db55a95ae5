"""Explainable semantic navigation for post-disaster aerial rasters."""

__version__ = "0.1.0"
