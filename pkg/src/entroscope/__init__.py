"""Reduced entropy of sublattices for small lattice models."""

__version__ = "0.1.0"
