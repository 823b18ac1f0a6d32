"""Quantum noise spectra and linewidths of feedback oscillators."""

__version__ = "0.1.0"
