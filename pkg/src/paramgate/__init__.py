"""Simulation and characterization of parametrically activated two-transmon gates."""

__version__ = "0.1.0"
