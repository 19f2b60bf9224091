"""Numerical geometry of Killing submersions over strict Hadamard surfaces."""

__version__ = "0.1.0"
