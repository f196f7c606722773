"""Symmetry-protected neutral modes in equivariant dynamical systems."""

__version__ = "0.1.0"
