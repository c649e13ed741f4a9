"""Cancellative interacting particle systems in one dimension."""

__version__ = "0.1.0"
