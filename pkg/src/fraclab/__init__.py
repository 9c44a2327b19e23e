"""Weighted estimates for fractional integrals and maximal functions on grids."""

__version__ = "0.1.0"
