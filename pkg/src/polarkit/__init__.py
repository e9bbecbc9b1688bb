"""Polar code construction by density evolution, block-error bounds and SC simulation."""

__version__ = "0.1.0"
