"""Numerics for one-dimensional diffusions in rough, time-dependent potentials."""

__version__ = "0.1.0"
