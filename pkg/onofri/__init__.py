"""Numerical checks of the Moser-Onofri duality on balls, the plane and the sphere."""

__all__ = ["cli", "runner"]
__version__ = "0.1.0"
