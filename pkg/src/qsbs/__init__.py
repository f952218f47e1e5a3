"""Simulator for quantum-enhanced stimulated Brillouin scattering microscopy."""

__version__ = "0.1.0"
