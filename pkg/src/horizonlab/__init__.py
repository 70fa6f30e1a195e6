"""Prediction horizons of approximate spectral propagation and their cost."""

__version__ = "0.1.0"
