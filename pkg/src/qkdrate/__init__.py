"""Certified asymptotic secret-key rates for QKD protocols with
partially characterized sources."""

__version__ = "0.1.0"
