"""Simulation and verification tools for balanced generalized Pólya urns."""

__version__ = "0.1.0"
