"""Boundary-element characteristic-mode analysis for closed PEC surfaces."""

__version__ = "0.1.0"
