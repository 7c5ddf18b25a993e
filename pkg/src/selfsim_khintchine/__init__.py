"""Diophantine approximation on self-similar measures: exact constructions and experiments."""

__version__ = "0.1.0"
