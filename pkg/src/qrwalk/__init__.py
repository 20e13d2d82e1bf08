"""Obtuse random variables, classical unitary interactions and random walks on U(H)."""

__version__ = "0.1.0"
