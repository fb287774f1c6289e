"""Wiring diagrams and the machines that inhabit them."""

__version__ = "0.1.0"
