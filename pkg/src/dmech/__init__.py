"""Discrete mechanics on trivial principal bundles: simulation, symmetry
reduction, Routh reduction, forced and nonholonomic systems."""

__version__ = "0.1.0"
