"""Singular sets of orthogonal projections of complete minimal surfaces."""

__version__ = "0.1.0"
