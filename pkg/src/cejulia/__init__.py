"""Numerical toolkit for porosity of Julia sets of Collet-Eckmann rational maps."""

__version__ = "0.1.0"
