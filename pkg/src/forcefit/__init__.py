"""Trajectory simulation, aerodynamic coefficient estimation and simulation-augmented launch classification."""

__version__ = "0.1.0"
