"""Simulation and verification tools for high-order BAM networks on time scales."""

__version__ = "0.1.0"
