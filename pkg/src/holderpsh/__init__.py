"""Plurisubharmonic exhaustion functions on Hölder graph domains."""

__version__ = "0.1.0"
