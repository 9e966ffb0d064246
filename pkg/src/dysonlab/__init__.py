"""Numerical laboratory for the Dyson equation, complex Burgers characteristics,
the coupled Burgers system and its particle / lattice approximations."""

__version__ = "0.1.0"
