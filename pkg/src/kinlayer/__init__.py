"""Boundary-layer corrected Hilbert expansion toolkit for the acoustic limit
of the Boltzmann equation with Maxwell reflection."""

__version__ = "0.1.0"
