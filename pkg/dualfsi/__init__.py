"""Monolithic fluid-structure interaction solver with dual mortar coupling."""

__version__ = "1.0.0"
