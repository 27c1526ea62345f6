"""Strain-tunable quantum-dot / lithium-niobate photonic chip simulator."""

__version__ = "0.1.0"
