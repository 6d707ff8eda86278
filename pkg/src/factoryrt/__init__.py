"""Deterministic ray-based propagation emulator for indoor-factory scenes."""

__version__ = "0.1.0"
