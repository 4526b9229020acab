"""Cognitive-radio network simulator: DSA + backpressure routing + RLNC."""

__version__ = "0.1.0"
