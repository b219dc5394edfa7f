"""Anosov checks for geodesic flows on surfaces without conjugate points."""

__all__ = ["__version__"]

__version__ = "0.1.0"
