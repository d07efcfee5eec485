"""Numerical laboratory for circular Dyson Brownian motion and multiradial Loewner chains."""

__version__ = "0.1.0"
