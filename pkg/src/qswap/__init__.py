"""Exact simulator for cavity-QED Bell-state preparation and entanglement swapping."""

__version__ = "0.1.0"
