"""Simulation toolkit for holographic beaming displays."""

__version__ = "0.1.0"
