"""Finite-dimensional realisations of local Hardy space and bmo constructions."""

__version__ = "0.1.0"
