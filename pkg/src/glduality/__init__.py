"""Duality-based certificates for Ginzburg-Landau critical points."""
__version__ = "0.1.0"
