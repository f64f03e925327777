"""Numerical verification of Reilly-type eigenvalue bounds and pinching estimates."""

__version__ = "0.1.0"

SCHEMA = "geomlab/1"
