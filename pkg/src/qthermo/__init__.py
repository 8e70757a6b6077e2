"""Stochastic and quantum thermodynamics simulations."""

__version__ = "0.1.0"
