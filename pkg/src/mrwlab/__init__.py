"""Simulation and verification laboratory for the minimal random walk."""

__version__ = "0.1.0"
