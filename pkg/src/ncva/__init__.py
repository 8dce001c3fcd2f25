"""Delayed-resonator tuning and verification for non-collocated vibration absorption."""

__version__ = "0.1.0"
